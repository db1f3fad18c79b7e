#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "orlicz/aharmonic.hpp"
#include "orlicz/field.hpp"
#include "orlicz/integrand.hpp"
#include "orlicz/mesh.hpp"
#include "orlicz/nfunction.hpp"
#include "orlicz/rng.hpp"
#include "orlicz/vmap.hpp"

namespace orlicz {

struct ExcessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Per-triangle clipped weights of B ∩ domain (summed quadrature weights).
struct BallWeights {
    std::vector<std::pair<std::size_t, double>> tri;
    double total = 0.0;
};

inline BallWeights ball_weights(const TriMesh& mesh, const Ball& ball) {
    BallWeights bw;
    std::vector<double> acc(mesh.triangle_count(), 0.0);
    clipped_quadrature(mesh, ball, [&](std::size_t t, Vec2, double w) {
        acc[t] += w;
        bw.total += w;
    });
    for (std::size_t t = 0; t < acc.size(); ++t)
        if (acc[t] > 0.0) bw.tri.emplace_back(t, acc[t]);
    if (bw.tri.empty()) throw MeshError("ball does not intersect the domain");
    return bw;
}

template <class Fn>
inline double ball_mean(const BallWeights& bw, const Fn& per_triangle) {
    double s = 0.0;
    for (const auto& [t, w] : bw.tri) s += w * per_triangle(t);
    return s / bw.total;
}

/// Magnitudes at cancellation-noise level count as exact zeros; feeding them
/// through the clamped N-function floor would manufacture spurious modulars.
inline double snap(double x, double scale) { return x > 1e-12 * scale ? x : 0.0; }

inline void require_inside(const TriMesh& mesh, const Ball& ball, double factor,
                           const char* what) {
    if (mesh.half_width <= 0.0) return; // polygonal sub-mesh: caller's duty
    const double r = factor * ball.radius;
    if (std::abs(ball.center.x) + r > mesh.half_width + 1e-12 ||
        std::abs(ball.center.y) + r > mesh.half_width + 1e-12)
        throw ExcessError(std::string(what) + ": ball scaled by " +
                          std::to_string(factor) + " leaves the domain");
}

} // namespace detail

/// Per-ball excess data: Phi_s(B,u), the V-mean, the V-energy, and the
/// smallness ratio on the doubled ball when it fits.
struct ExcessReport {
    Ball ball;
    double s = 1.0;
    double phi_s = 0.0;
    Mat22 mean_V;
    double energy_V = 0.0;
    double small_delta = std::numeric_limits<double>::quiet_NaN();
    bool small_valid = false;
};

/// Phi_s(B, u) = (avg_B |V(grad u) - <V(grad u)>_B|^{2s})^{1/s}.
inline double excess_value(const std::vector<Mat22>& v_tri,
                           const detail::BallWeights& bw, double s) {
    Mat22 mean;
    double vmax = 0.0;
    for (const auto& [t, w] : bw.tri) {
        mean += v_tri[t] * w;
        vmax = std::max(vmax, v_tri[t].norm());
    }
    mean = mean * (1.0 / bw.total);
    double acc = 0.0;
    for (const auto& [t, w] : bw.tri)
        acc += w * std::pow((v_tri[t] - mean).dot(v_tri[t] - mean), s);
    const double value = std::pow(acc / bw.total, 1.0 / s);
    // oscillation at rounding level is an exact zero
    return value > 1e-26 * vmax * vmax ? value : 0.0;
}

inline ExcessReport excess(const FieldP1& u, const Ball& ball, double s,
                           const NFunction& phi) {
    if (!(s >= 1.0)) throw ExcessError("excess exponent must satisfy s >= 1");
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 1.0, "excess");
    auto grads = gradient(u);
    std::vector<Mat22> v(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) v[t] = v_map(phi, grads[t]);

    ExcessReport rep;
    rep.ball = ball;
    rep.s = s;
    auto bw = detail::ball_weights(mesh, ball);
    for (const auto& [t, w] : bw.tri) rep.mean_V += v[t] * w;
    rep.mean_V = rep.mean_V * (1.0 / bw.total);
    rep.energy_V = detail::ball_mean(bw, [&](std::size_t t) { return v[t].dot(v[t]); });
    rep.phi_s = excess_value(v, bw, s);

    const Ball twice = ball.scaled(2.0);
    if (mesh.half_width > 0.0 &&
        std::abs(ball.center.x) + twice.radius <= mesh.half_width + 1e-12 &&
        std::abs(ball.center.y) + twice.radius <= mesh.half_width + 1e-12) {
        auto bw2 = detail::ball_weights(mesh, twice);
        const double num = excess_value(v, bw2, 1.0);
        const double den =
            detail::ball_mean(bw2, [&](std::size_t t) { return v[t].dot(v[t]); });
        if (den > 0.0) {
            rep.small_delta = num / den;
            rep.small_valid = true;
        }
    }
    return rep;
}

struct SmallnessResult {
    bool holds = false;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    bool vacuous = false; // denominator vanished (constant field)
};

/// The Main-Theorem hypothesis Phi(2B, u) <= delta avg_{2B} |V(grad u)|^2.
inline SmallnessResult smallness_check(const FieldP1& u, const Ball& ball, double delta,
                                       const NFunction& phi) {
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 2.0, "smallness_check");
    auto grads = gradient(u);
    std::vector<Mat22> v(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) v[t] = v_map(phi, grads[t]);
    auto bw = detail::ball_weights(mesh, ball.scaled(2.0));
    const double num = excess_value(v, bw, 1.0);
    const double den =
        detail::ball_mean(bw, [&](std::size_t t) { return v[t].dot(v[t]); });
    SmallnessResult res;
    if (den <= 0.0) {
        res.holds = true;
        res.vacuous = true;
        return res;
    }
    res.ratio = num / den;
    res.holds = res.ratio <= delta;
    return res;
}

/// Interior gradient-modular control by zeroth-order differences:
/// int_B phi_{|Q|}(|grad u - Q|) over int_{2B} phi_{|Q|}(|u - q| / R), with q
/// the affine map with gradient Q centred so that <u - q>_{2B} = 0.
inline double caccioppoli_ratio(const FieldP1& u, const Ball& ball, const Mat22& q_grad,
                                const NFunction& phi) {
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 2.0, "caccioppoli_ratio");
    auto phi_a = shift(phi, q_grad.norm());
    auto grads = gradient(u);

    const Ball twice = ball.scaled(2.0);
    const Vec2 offset = [&] {
        Vec2 num;
        double den = 0.0;
        clipped_quadrature(mesh, twice, [&](std::size_t t, Vec2 p, double w) {
            num += (u.eval_in(t, p) - q_grad.apply(p)) * w;
            den += w;
        });
        return num / den;
    }();
    const AffineField q{q_grad, offset};

    auto bw = detail::ball_weights(mesh, ball);
    double gscale = q_grad.norm();
    for (const auto& [t, w] : bw.tri) gscale = std::max(gscale, grads[t].norm());
    double lhs = 0.0;
    for (const auto& [t, w] : bw.tri)
        lhs += w * phi_a.value(detail::snap((grads[t] - q_grad).norm(), gscale));

    double vscale = 0.0;
    clipped_quadrature(mesh, twice, [&](std::size_t t, Vec2 p, double) {
        vscale = std::max({vscale, u.eval_in(t, p).norm(), q.eval(p).norm()});
    });
    double rhs = 0.0;
    clipped_quadrature(mesh, twice, [&](std::size_t t, Vec2 p, double w) {
        rhs += w * phi_a.value(
                       detail::snap((u.eval_in(t, p) - q.eval(p)).norm(), vscale) /
                       ball.radius);
    });
    if (rhs <= 0.0) {
        if (lhs <= 0.0) return 0.0;
        return std::numeric_limits<double>::infinity(); // flagged violation
    }
    return lhs / rhs;
}

/// avg_B psi(|w - <w>_B| / R) over (avg_B psi^alpha(|grad w|))^{1/alpha}.
inline double poincare_ratio(const FieldP1& w, const Ball& ball, const NFunction& psi,
                             double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw ExcessError("poincare_ratio expects alpha in (0, 1]");
    const TriMesh& mesh = *w.mesh;
    detail::require_inside(mesh, ball, 1.0, "poincare_ratio");
    const Vec2 mean = ball_average(w, ball);
    double lhs = 0.0, area = 0.0;
    clipped_quadrature(mesh, ball, [&](std::size_t t, Vec2 p, double wq) {
        lhs += wq * psi.value((w.eval_in(t, p) - mean).norm() / ball.radius);
        area += wq;
    });
    lhs /= area;
    auto grads = gradient(w);
    auto bw = detail::ball_weights(mesh, ball);
    const double rhs_mod = detail::ball_mean(bw, [&](std::size_t t) {
        const double n = grads[t].norm();
        return n > 0.0 ? std::pow(psi.value(n), alpha) : 0.0;
    });
    if (rhs_mod <= 0.0) return 0.0; // constant field
    return lhs / std::pow(rhs_mod, 1.0 / alpha);
}

/// Reverse-Hoelder quotient of Cor. gehring3:
/// (avg_B |V - V(Q)|^{2 s0})^{1/s0} over avg_{2B} |V - V(Q)|^2.
inline double reverse_holder_ratio(const FieldP1& u, const Ball& ball, const Mat22& q,
                                   double s0, const NFunction& phi) {
    if (!(s0 > 1.0)) throw ExcessError("reverse_holder_ratio expects s0 > 1");
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 2.0, "reverse_holder_ratio");
    auto grads = gradient(u);
    const Mat22 vq = v_map(phi, q);
    std::vector<double> dev2(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) {
        const Mat22 d = v_map(phi, grads[t]) - vq;
        dev2[t] = d.dot(d);
    }
    auto bw = detail::ball_weights(mesh, ball);
    const double lhs = std::pow(
        detail::ball_mean(bw, [&](std::size_t t) { return std::pow(dev2[t], s0); }),
        1.0 / s0);
    auto bw2 = detail::ball_weights(mesh, ball.scaled(2.0));
    const double rhs = detail::ball_mean(bw2, [&](std::size_t t) { return dev2[t]; });
    if (rhs <= 0.0) return lhs <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return lhs / rhs;
}

/// Measured almost-A-harmonicity constant: the worst normalized pairing
/// |avg_B D2f(Q)(grad u - Q, grad xi)| over phi''(|Q|) avg_{2B}|grad u - Q|
/// ||grad xi||_inf, across the interior nodal basis of the sub-mesh of B plus
/// seeded random zero-boundary fields.
inline double almost_harmonicity_defect(const FieldP1& u, const Ball& ball,
                                        const Integrand& f, std::uint64_t seed = 7771,
                                        int random_fields = 10) {
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 2.0, "almost_harmonicity_defect");
    auto grads = gradient(u);
    const Mat22 q = ball_average(mesh, grads, ball.scaled(2.0));
    if (q.norm() == 0.0)
        throw ExcessError("mean gradient vanishes on 2B: degenerate configuration");
    const Tensor4 a = f.d2f(q);
    const double phidd = f.phi.raw_second(q.norm());

    auto bw2 = detail::ball_weights(mesh, ball.scaled(2.0));
    const double base =
        detail::ball_mean(bw2, [&](std::size_t t) { return (grads[t] - q).norm(); });
    if (base <= 0.0) return 0.0; // u is the affine field itself

    const double ball_area = clipped_area(mesh, ball);
    auto sub = restrict_to_ball(u.mesh, ball);
    const TriMesh& sm = *sub.mesh;

    // A(grad u - Q) per sub-mesh triangle, pulled from the parent field
    std::vector<Mat22> a_dev(sm.triangle_count());
    for (std::size_t t = 0; t < sm.triangle_count(); ++t)
        a_dev[t] = a.apply(grads[static_cast<std::size_t>(sub.tri_of_parent[t])] - q);

    double defect = 0.0;
    auto consider = [&](double pairing, double sup) {
        if (sup == 0.0) return;
        defect = std::max(defect, std::abs(pairing) / ball_area / (phidd * base * sup));
    };

    // nodal basis fields: star-local pairings
    std::vector<std::vector<std::pair<int, int>>> star(sm.vertex_count());
    for (std::size_t t = 0; t < sm.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k)
            star[sm.triangles[t][k]].emplace_back(static_cast<int>(t), k);
    for (std::size_t v = 0; v < sm.vertex_count(); ++v) {
        if (sm.is_boundary[v]) continue;
        double sup = 0.0, pair0 = 0.0, pair1 = 0.0;
        for (const auto& [t, k] : star[v]) {
            const Vec2 bg = sm.basis_grad[static_cast<std::size_t>(t)][k];
            sup = std::max(sup, bg.norm());
            const Mat22& ad = a_dev[static_cast<std::size_t>(t)];
            const double area = sm.area[static_cast<std::size_t>(t)];
            pair0 += area * (ad.e[0][0] * bg.x + ad.e[0][1] * bg.y);
            pair1 += area * (ad.e[1][0] * bg.x + ad.e[1][1] * bg.y);
        }
        consider(pair0, sup);
        consider(pair1, sup);
    }

    SplitMix64 rng(seed);
    for (int r = 0; r < random_fields; ++r) {
        FieldP1 xi(sub.mesh);
        for (std::size_t v = 0; v < sm.vertex_count(); ++v)
            if (!sm.is_boundary[v]) xi.values[v] = {rng.normal(), rng.normal()};
        auto gxi = gradient(xi);
        double sup = 0.0, pairing = 0.0;
        for (std::size_t t = 0; t < sm.triangle_count(); ++t) {
            sup = std::max(sup, gxi[t].norm());
            pairing += sm.area[t] * a_dev[t].dot(gxi[t]);
        }
        consider(pairing, sup);
    }
    return defect;
}

struct ClosenessReport {
    double lhs = 0.0;     // avg_B psi(|w|/r_B) + avg_B psi(|grad w|)
    double rhs = 0.0;     // (avg_B psi^s(...))^{1/s} + avg_{2B} psi(...)
    double epsilon = 0.0; // lhs / rhs
    Mat22 q;              // <grad u>_{2B}
};

/// Closeness of u to its A-harmonic approximation, measured in the shifted
/// modular psi = phi_{|Q|} with A = D2f(Q)/phi''(|Q|) and Q = <grad u>_{2B}.
inline ClosenessReport approximation_closeness(const FieldP1& u, const Ball& ball,
                                               const Integrand& f, double s) {
    if (!(s > 1.0)) throw ExcessError("approximation_closeness expects s > 1");
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 2.0, "approximation_closeness");
    auto grads = gradient(u);
    ClosenessReport rep;
    rep.q = ball_average(mesh, grads, ball.scaled(2.0));
    if (rep.q.norm() == 0.0)
        throw ExcessError("mean gradient vanishes on 2B: degenerate configuration");
    const EllipticTensor a = tensor_from_integrand(f, rep.q);
    auto psi = shift(f.phi, rep.q.norm());

    // z = u - q with <u - q>_{2B} = 0
    Vec2 offset;
    {
        Vec2 num;
        double den = 0.0;
        clipped_quadrature(mesh, ball.scaled(2.0), [&](std::size_t t, Vec2 p, double w) {
            num += (u.eval_in(t, p) - rep.q.apply(p)) * w;
            den += w;
        });
        offset = num / den;
    }
    FieldP1 z = u;
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
        z.values[v] = u.values[v] - rep.q.apply(mesh.vertices[v]) - offset;

    auto appr = harmonic_approximation(a, z, ball);
    const TriMesh& sm = *appr.sub.mesh;
    auto gw = gradient(appr.w);
    double zscale = rep.q.norm() * ball.radius, gzscale = rep.q.norm();
    for (const auto& val : appr.u.values) zscale = std::max(zscale, val.norm());
    for (const auto& g : gradient(appr.u)) gzscale = std::max(gzscale, g.norm());
    double mod_w = 0.0, mod_gw = 0.0;
    domain_quadrature(sm, [&](std::size_t t, Vec2 p, double w) {
        mod_w += w * psi.value(detail::snap(appr.w.eval_in(t, p).norm(), zscale) /
                               ball.radius);
        mod_gw += w * psi.value(detail::snap(gw[t].norm(), gzscale));
    });
    const double sub_area = sm.total_area();
    rep.lhs = (mod_w + mod_gw) / sub_area;

    auto bw = detail::ball_weights(mesh, ball);
    const double pow_term = std::pow(
        detail::ball_mean(bw,
                          [&](std::size_t t) {
                              return std::pow(psi.value((grads[t] - rep.q).norm()), s);
                          }),
        1.0 / s);
    auto bw2 = detail::ball_weights(mesh, ball.scaled(2.0));
    const double plain_term = detail::ball_mean(
        bw2, [&](std::size_t t) { return psi.value((grads[t] - rep.q).norm()); });
    rep.rhs = pow_term + plain_term;
    rep.epsilon = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

struct DecayCurve {
    Vec2 center;
    std::vector<double> radii;  // kept radii, decreasing
    double beta = 0.5;
    std::vector<double> values; // Phi(B(center, r), u)
    double fitted_slope = std::numeric_limits<double>::quiet_NaN();
    bool slope_defined = false;
    double tau_half = std::numeric_limits<double>::quiet_NaN();    // Phi(B_max/2)/Phi(2 B_max)
    double tau_quarter = std::numeric_limits<double>::quiet_NaN(); // Phi(B_max/4)/Phi(2 B_max)
    std::string warning;
};

/// Excess decay along a shrinking radius list, with the log-log fitted slope
/// and the single-step ratios against the doubled largest ball.
inline DecayCurve decay_curve(const FieldP1& u, Vec2 center,
                              const std::vector<double>& radii, double beta,
                              const NFunction& phi) {
    if (!(beta > 0.0) || !(beta < 1.0))
        throw ExcessError("decay exponent beta must lie in (0,1)");
    const TriMesh& mesh = *u.mesh;
    DecayCurve curve;
    curve.center = center;
    curve.beta = beta;
    double prev = std::numeric_limits<double>::infinity();
    for (double r : radii) {
        if (!(r < prev))
            throw ExcessError("decay radii must be strictly decreasing");
        prev = r;
        if (r < 8.0 * mesh.h) {
            curve.warning += "radius " + std::to_string(r) +
                             " below the 8h resolution floor; dropped. ";
            continue;
        }
        if (std::abs(center.x) + 2.0 * r > mesh.half_width ||
            std::abs(center.y) + 2.0 * r > mesh.half_width) {
            curve.warning += "radius " + std::to_string(r) + " leaves the domain; dropped. ";
            continue;
        }
        curve.radii.push_back(r);
    }
    if (curve.radii.empty()) return curve;

    auto grads = gradient(u);
    std::vector<Mat22> v(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) v[t] = v_map(phi, grads[t]);
    for (double r : curve.radii) {
        auto bw = detail::ball_weights(mesh, Ball{center, r});
        curve.values.push_back(excess_value(v, bw, 1.0));
    }

    // least-squares slope of log Phi against log r
    int n = 0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < curve.radii.size(); ++i) {
        if (!(curve.values[i] > 0.0)) continue;
        const double x = std::log(curve.radii[i]);
        const double y = std::log(curve.values[i]);
        ++n;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if (n >= 2 && sxx * n - sx * sx > 0.0) {
        curve.fitted_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        curve.slope_defined = true;
    } else {
        curve.warning += "slope undefined (excess vanishes or too few radii). ";
    }

    const double rmax = curve.radii.front();
    if (std::abs(center.x) + 2.0 * rmax <= mesh.half_width &&
        std::abs(center.y) + 2.0 * rmax <= mesh.half_width) {
        auto big = detail::ball_weights(mesh, Ball{center, 2.0 * rmax});
        const double phi2b = excess_value(v, big, 1.0);
        if (phi2b > 0.0) {
            auto half = detail::ball_weights(mesh, Ball{center, 0.5 * rmax});
            curve.tau_half = excess_value(v, half, 1.0) / phi2b;
            if (0.25 * rmax >= 8.0 * mesh.h) {
                auto quarter = detail::ball_weights(mesh, Ball{center, 0.25 * rmax});
                curve.tau_quarter = excess_value(v, quarter, 1.0) / phi2b;
            }
        }
    }
    return curve;
}

struct ScanEntry {
    Vec2 center;
    double proxy = 0.0;  // min over the radius list of Phi(B(center, r))
    double margin = std::numeric_limits<double>::quiet_NaN(); // smallness ratio
};

/// liminf proxy of the regular-set indicator over a center grid.
inline std::vector<ScanEntry> regular_scan(const FieldP1& u, double grid_step,
                                           const std::vector<double>& radii,
                                           const NFunction& phi) {
    const TriMesh& mesh = *u.mesh;
    if (!(grid_step > 0.0)) throw ExcessError("grid step must be positive");
    std::vector<double> kept;
    for (double r : radii)
        if (r >= 8.0 * mesh.h) kept.push_back(r);
    if (kept.empty()) throw ExcessError("all scan radii are below the resolution floor");
    const double rmax = *std::max_element(kept.begin(), kept.end());
    const double reach = mesh.half_width - 2.0 * rmax;
    if (reach <= 0.0) throw ExcessError("largest scan radius does not fit the domain");

    auto grads = gradient(u);
    std::vector<Mat22> v(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) v[t] = v_map(phi, grads[t]);

    std::vector<ScanEntry> entries;
    const int n = static_cast<int>(std::floor(reach / grid_step));
    for (int j = -n; j <= n; ++j)
        for (int i = -n; i <= n; ++i) {
            ScanEntry e;
            e.center = {i * grid_step, j * grid_step};
            double best = std::numeric_limits<double>::infinity();
            for (double r : kept) {
                auto bw = detail::ball_weights(mesh, Ball{e.center, r});
                best = std::min(best, excess_value(v, bw, 1.0));
            }
            e.proxy = best;
            auto bw2 = detail::ball_weights(mesh, Ball{e.center, 2.0 * rmax});
            const double num = excess_value(v, bw2, 1.0);
            const double den =
                detail::ball_mean(bw2, [&](std::size_t t) { return v[t].dot(v[t]); });
            if (den > 0.0) e.margin = num / den;
            entries.push_back(e);
        }
    return entries;
}

/// avg_B |V - <V>_B|^2 over avg_B |V - V(<grad u>_B)|^2; the mean projects in
/// L^2, so the ratio never exceeds 1.
inline double mean_comparison_ratio(const FieldP1& u, const Ball& ball,
                                    const NFunction& phi) {
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 1.0, "mean_comparison_ratio");
    auto grads = gradient(u);
    std::vector<Mat22> v(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) v[t] = v_map(phi, grads[t]);
    auto bw = detail::ball_weights(mesh, ball);
    Mat22 mean_v;
    Mat22 mean_g;
    for (const auto& [t, w] : bw.tri) {
        mean_v += v[t] * w;
        mean_g += grads[t] * w;
    }
    mean_v = mean_v * (1.0 / bw.total);
    mean_g = mean_g * (1.0 / bw.total);
    const Mat22 v_of_mean = v_map(phi, mean_g);
    double vmax = 0.0;
    for (const auto& [t, w] : bw.tri) vmax = std::max(vmax, v[t].norm());
    const double lhs = detail::ball_mean(bw, [&](std::size_t t) {
        return (v[t] - mean_v).dot(v[t] - mean_v);
    });
    const double rhs = detail::ball_mean(bw, [&](std::size_t t) {
        return (v[t] - v_of_mean).dot(v[t] - v_of_mean);
    });
    if (rhs <= 1e-26 * vmax * vmax) return 1.0; // 0/0: V constant on the ball
    return lhs / rhs;
}

struct NondegeneracyBounds {
    double r1 = 0.0; // avg_B |V|^2 / (4 |V(<grad u>_B)|^2)
    double r2 = 0.0; // Phi(B) / (4 delta |V(<grad u>_B)|^2)
    double r3 = 0.0; // avg_B |grad u - <grad u>_B| / |<grad u>_B|
};

inline NondegeneracyBounds nondegeneracy_bounds(const FieldP1& u, const Ball& ball,
                                                double delta, const NFunction& phi) {
    if (!(delta > 0.0)) throw ExcessError("delta must be positive");
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 1.0, "nondegeneracy_bounds");
    auto grads = gradient(u);
    auto bw = detail::ball_weights(mesh, ball);
    Mat22 mean_g;
    for (const auto& [t, w] : bw.tri) mean_g += grads[t] * w;
    mean_g = mean_g * (1.0 / bw.total);
    if (mean_g.norm() == 0.0)
        throw ExcessError("mean gradient vanishes on B: degenerate configuration");
    std::vector<Mat22> v(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) v[t] = v_map(phi, grads[t]);
    const double vq2 = v_map_norm2(phi, mean_g);

    NondegeneracyBounds nb;
    nb.r1 = detail::ball_mean(bw, [&](std::size_t t) { return v[t].dot(v[t]); }) /
            (4.0 * vq2);
    nb.r2 = excess_value(v, bw, 1.0) / (4.0 * delta * vq2);
    nb.r3 = detail::ball_mean(bw, [&](std::size_t t) { return (grads[t] - mean_g).norm(); }) /
            mean_g.norm();
    return nb;
}

/// avg_B phi_{|Q|}(|grad u - Q|) over phi_{|Q|}(avg_{2B} |grad u - Q|).
inline double shifted_mean_bound(const FieldP1& u, const Ball& ball, const Mat22& q,
                                 const NFunction& phi) {
    const TriMesh& mesh = *u.mesh;
    detail::require_inside(mesh, ball, 2.0, "shifted_mean_bound");
    auto phi_a = shift(phi, q.norm());
    auto grads = gradient(u);
    auto bw = detail::ball_weights(mesh, ball);
    double gscale = q.norm();
    for (const auto& [t, w] : bw.tri) gscale = std::max(gscale, grads[t].norm());
    const double lhs = detail::ball_mean(bw, [&](std::size_t t) {
        return phi_a.value(detail::snap((grads[t] - q).norm(), gscale));
    });
    auto bw2 = detail::ball_weights(mesh, ball.scaled(2.0));
    const double mean_dev = detail::ball_mean(bw2, [&](std::size_t t) {
        return detail::snap((grads[t] - q).norm(), gscale);
    });
    const double den = phi_a.value(mean_dev);
    if (den <= 0.0) return 0.0;
    return lhs / den;
}

} // namespace orlicz
