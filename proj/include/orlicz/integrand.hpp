#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "orlicz/algebra.hpp"
#include "orlicz/nfunction.hpp"
#include "orlicz/rng.hpp"

namespace orlicz {

struct IntegrandError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Growth/ellipticity constants of an integrand, measured on a sample cloud:
/// |f| <= k_upper phi(|Q|), |D2f| <= c_second phi''(|Q|), the Hoelder modulus
/// of D2f away from zero, and the rank-one (Legendre-Hadamard) lower bound
/// relative to phi''(|Q|).
struct HypothesisConstants {
    double k_upper = 0.0;
    double c_second = 0.0;
    double c_hoelder = 0.0;
    double lh_lower = 0.0;
};

/// Integrand f with its first two derivatives and the growth function phi.
struct Integrand {
    std::function<double(const Mat22&)> f;
    std::function<Mat22(const Mat22&)> df;
    std::function<Tensor4(const Mat22&)> d2f; // valid away from Q = 0
    NFunction phi;
    std::string kind;           // "radial" | "radial-perturbed"
    double beta = 1.0;          // Hoelder exponent of the D2f modulus
    HypothesisConstants constants;

    /// D2f with the degenerate point regularized: arguments below the floor
    /// are replaced by the ray point at |Q| = floor (fixed direction at 0).
    Tensor4 d2f_floored(const Mat22& q, double floor = 1e-8) const {
        const double n = q.norm();
        if (n >= floor) return d2f(q);
        if (n == 0.0) {
            Mat22 e;
            e.e[0][0] = floor;
            return d2f(e);
        }
        return d2f(q * (floor / n));
    }
};

namespace detail {

inline Tensor4 radial_d2f(const NFunction& phi, const Mat22& q) {
    const double n = q.norm();
    const Mat22 qh = q * (1.0 / n);
    const double dd = phi.raw_second(n);
    const double tangential = phi.raw_deriv(n) / n;
    Tensor4 r;
    for (int i = 0; i < 2; ++i)
        for (int a = 0; a < 2; ++a)
            for (int j = 0; j < 2; ++j)
                for (int b = 0; b < 2; ++b) {
                    double v = (dd - tangential) * qh.e[i][a] * qh.e[j][b];
                    if (i == j && a == b) v += tangential;
                    r.t[i][a][j][b] = v;
                }
    return r;
}

inline Mat22 random_direction(SplitMix64& rng) {
    Mat22 m;
    double n2 = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            m.e[i][j] = rng.normal();
            n2 += m.e[i][j] * m.e[i][j];
        }
    return m * (1.0 / std::sqrt(n2));
}

} // namespace detail

/// Measures the hypothesis constants on a seeded cloud spanning several
/// decades of |Q|.  Throws when the rank-one lower bound fails.
inline HypothesisConstants check_hypotheses(const Integrand& f, std::uint64_t seed = 2024,
                                            int nsamples = 400) {
    SplitMix64 rng(seed);
    HypothesisConstants c;
    c.lh_lower = 1e300;
    for (int s = 0; s < nsamples; ++s) {
        const double scale = rng.log_uniform(1e-3, 1e3);
        const Mat22 q = detail::random_direction(rng) * scale;
        const double n = q.norm();
        const double phiv = f.phi.raw_value(n);
        const double phidd = f.phi.raw_second(n);
        c.k_upper = std::max(c.k_upper, std::abs(f.f(q)) / phiv);
        const Tensor4 h = f.d2f(q);
        c.c_second = std::max(c.c_second, h.norm() / phidd);

        // Hoelder modulus of D2f on |P| <= |Q|/2
        const Mat22 p = detail::random_direction(rng) * (rng.uniform01() * 0.5 * n);
        const double pn = p.norm();
        if (pn > 0.0) {
            const double num = (f.d2f(q) - f.d2f(q + p)).norm();
            const double den = phidd * std::pow(n, -f.beta) * std::pow(pn, f.beta);
            c.c_hoelder = std::max(c.c_hoelder, num / den);
        }

        // rank-one lower bound on a small angle grid plus random directions
        for (int g = 0; g < 8; ++g) {
            const double a1 = rng.uniform(0.0, 2.0 * M_PI);
            const double a2 = rng.uniform(0.0, 2.0 * M_PI);
            const Vec2 eta{std::cos(a1), std::sin(a1)};
            const Vec2 xi{std::cos(a2), std::sin(a2)};
            const Mat22 r1 = Mat22::outer(eta, xi);
            c.lh_lower = std::min(c.lh_lower, h.bilinear(r1, r1) / phidd);
        }
    }
    if (!(c.lh_lower > 0.0))
        throw IntegrandError("Legendre-Hadamard lower bound is not positive: " +
                             std::to_string(c.lh_lower));
    return c;
}

/// f(Q) = phi(|Q|); Df is the A-map, D2f the radial split into the ray and
/// tangential eigenvalues phi''(|Q|) and phi'(|Q|)/|Q|.
inline Integrand make_radial(const NFunction& phi) {
    Integrand f;
    f.kind = "radial";
    f.phi = phi;
    f.beta = 1.0;
    auto value = phi.raw_value;
    auto deriv = phi.raw_deriv;
    f.f = [value](const Mat22& q) {
        const double n = q.norm();
        return n == 0.0 ? 0.0 : value(n);
    };
    f.df = [deriv](const Mat22& q) {
        const double n = q.norm();
        if (n == 0.0) return Mat22{};
        return q * (deriv(n) / n);
    };
    NFunction phi_copy = phi;
    f.d2f = [phi_copy](const Mat22& q) { return detail::radial_d2f(phi_copy, q); };
    f.constants = check_hypotheses(f);
    return f;
}

/// f(Q) = phi(sqrt(|Q|^2 + eps Q_11^2)): an anisotropic, rank-one-flavoured
/// perturbation that stays within (H1)-(H5); eps = 0 reproduces the radial
/// integrand exactly.
inline Integrand make_perturbed(const NFunction& phi, double eps) {
    if (eps < 0.0 || eps > 0.5)
        throw IntegrandError("perturbation strength must lie in [0, 0.5], got " +
                             std::to_string(eps));
    Integrand f;
    f.kind = "radial-perturbed";
    f.phi = phi;
    f.beta = 1.0;
    auto value = phi.raw_value;
    auto deriv = phi.raw_deriv;
    auto second = phi.raw_second;
    auto rho = [eps](const Mat22& q) {
        return std::sqrt(q.dot(q) + eps * q.e[0][0] * q.e[0][0]);
    };
    auto wmat = [eps](const Mat22& q) {
        Mat22 w = q;
        w.e[0][0] += eps * q.e[0][0];
        return w;
    };
    f.f = [value, rho](const Mat22& q) {
        const double r = rho(q);
        return r == 0.0 ? 0.0 : value(r);
    };
    f.df = [deriv, rho, wmat](const Mat22& q) {
        const double r = rho(q);
        if (r == 0.0) return Mat22{};
        return wmat(q) * (deriv(r) / r);
    };
    f.d2f = [deriv, second, rho, wmat, eps](const Mat22& q) {
        const double r = rho(q);
        const Mat22 wh = wmat(q) * (1.0 / r);
        const double ray = second(r);
        const double tangential = deriv(r) / r;
        Tensor4 out;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 2; ++j)
                    for (int b = 0; b < 2; ++b) {
                        double v = (ray - tangential) * wh.e[i][a] * wh.e[j][b];
                        if (i == j && a == b) v += tangential;
                        if (i == 0 && a == 0 && j == 0 && b == 0) v += tangential * eps;
                        out.t[i][a][j][b] = v;
                    }
        return out;
    };
    f.constants = check_hypotheses(f);
    return f;
}

} // namespace orlicz
