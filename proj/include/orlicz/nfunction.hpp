#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "orlicz/quadrature.hpp"

namespace orlicz {

struct NFunctionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class NKind { closed_form, shifted, conjugate_numeric, psi_derived };

namespace detail {

/// Monotone cubic Hermite (Fritsch-Carlson) interpolation of positive data on
/// a log-spaced grid, fitted in (log t, log y) coordinates.  Positive strictly
/// increasing input stays positive and monotone under evaluation.
class LogGridCurve {
public:
    LogGridCurve(std::vector<double> t, std::vector<double> y) {
        const std::size_t n = t.size();
        lx_.resize(n);
        ly_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            lx_[i] = std::log(t[i]);
            ly_[i] = std::log(y[i]);
        }
        slopes_();
    }

    double t_front() const { return std::exp(lx_.front()); }
    double t_back() const { return std::exp(lx_.back()); }

    double eval(double t) const {
        const double x = std::log(t);
        std::size_t i = interval_(x);
        const double h = lx_[i + 1] - lx_[i];
        const double s = (x - lx_[i]) / h;
        const double s2 = s * s, s3 = s2 * s;
        const double v = (2 * s3 - 3 * s2 + 1) * ly_[i] + (s3 - 2 * s2 + s) * h * m_[i] +
                         (-2 * s3 + 3 * s2) * ly_[i + 1] + (s3 - s2) * h * m_[i + 1];
        return std::exp(v);
    }

private:
    std::size_t interval_(double x) const {
        if (x <= lx_.front()) return 0;
        if (x >= lx_[lx_.size() - 2]) return lx_.size() - 2;
        return static_cast<std::size_t>(
                   std::upper_bound(lx_.begin(), lx_.end(), x) - lx_.begin()) -
               1;
    }

    void slopes_() {
        const std::size_t n = lx_.size();
        std::vector<double> d(n - 1), h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            h[i] = lx_[i + 1] - lx_[i];
            d[i] = (ly_[i + 1] - ly_[i]) / h[i];
        }
        m_.assign(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0.0) {
                m_[i] = 0.0;
            } else {
                const double w1 = 2 * h[i] + h[i - 1];
                const double w2 = h[i] + 2 * h[i - 1];
                m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        auto endpoint = [](double h0, double h1, double d0, double d1) {
            double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if (m * d0 <= 0.0) return 0.0;
            if (std::abs(m) > 3 * std::abs(d0)) return 3 * d0;
            return m;
        };
        m_.front() = endpoint(h[0], h[1], d[0], d[1]);
        m_.back() = endpoint(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    }

    std::vector<double> lx_, ly_, m_;
};

inline constexpr int kGridPointsPerDecade = 96;

inline std::vector<double> log_grid(double lo, double hi) {
    const double decades = std::log10(hi / lo);
    const int n = std::max(16, static_cast<int>(decades * kGridPointsPerDecade) + 1);
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i)
        t[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, double(i) / n);
    t.front() = lo;
    t.back() = hi;
    return t;
}

} // namespace detail

/// Evaluator bundle for an N-function: value, first and second derivative,
/// with a validity window for numeric evaluation.
///
/// The public accessors clamp arguments into [t_min, t_max] (counting the
/// clamps) except at t = 0 where phi(0) = phi'(0) = 0 exactly.  The raw_*
/// callables evaluate without clamping and are what the quadrature, bisection
/// and cache layers compose.
class NFunction {
public:
    std::function<double(double)> raw_value, raw_deriv, raw_second;
    NKind kind = NKind::closed_form;
    double t_min = 1e-6, t_max = 1e6;
    std::string name;

    NFunction() : clamp_hits_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

    double value(double t) const { return t == 0.0 ? 0.0 : raw_value(clamp(t)); }
    double deriv(double t) const { return t == 0.0 ? 0.0 : raw_deriv(clamp(t)); }
    double second(double t) const { return raw_second(clamp(t)); }

    double clamp(double t) const {
        if (t < t_min) { ++*clamp_hits_; return t_min; }
        if (t > t_max) { ++*clamp_hits_; return t_max; }
        return t;
    }
    std::uint64_t clamp_count() const { return clamp_hits_->load(); }

private:
    std::shared_ptr<std::atomic<std::uint64_t>> clamp_hits_;
};

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

struct CatalogSpec {
    std::string kind = "power"; // power | power_log | quadratic
    double p = 2.0;
};

/// phi(t) = t^p / p.
inline NFunction make_power(double p) {
    if (!(p > 1.0))
        throw NFunctionError("power exponent must satisfy p > 1 (conjugate would "
                             "not be an N-function), got p = " + std::to_string(p));
    NFunction f;
    f.kind = NKind::closed_form;
    f.name = "power(p=" + std::to_string(p) + ")";
    f.raw_value = [p](double t) { return std::pow(t, p) / p; };
    f.raw_deriv = [p](double t) { return std::pow(t, p - 1.0); };
    f.raw_second = [p](double t) { return (p - 1.0) * std::pow(t, p - 2.0); };
    return f;
}

/// phi(t) = t^p log(e + t).
inline NFunction make_power_log(double p) {
    if (!(p > 1.0))
        throw NFunctionError("power_log exponent must satisfy p > 1, got p = " +
                             std::to_string(p));
    NFunction f;
    f.kind = NKind::closed_form;
    f.name = "power_log(p=" + std::to_string(p) + ")";
    const double e = std::exp(1.0);
    f.raw_value = [p, e](double t) { return std::pow(t, p) * std::log(e + t); };
    f.raw_deriv = [p, e](double t) {
        return p * std::pow(t, p - 1.0) * std::log(e + t) + std::pow(t, p) / (e + t);
    };
    f.raw_second = [p, e](double t) {
        return p * (p - 1.0) * std::pow(t, p - 2.0) * std::log(e + t) +
               2.0 * p * std::pow(t, p - 1.0) / (e + t) -
               std::pow(t, p) / ((e + t) * (e + t));
    };
    return f;
}

inline NFunction make_quadratic() { return make_power(2.0); }

inline NFunction make_catalog(const CatalogSpec& spec) {
    if (spec.kind == "power") return make_power(spec.p);
    if (spec.kind == "power_log") return make_power_log(spec.p);
    if (spec.kind == "quadratic") return make_quadratic();
    throw NFunctionError("unknown N-function kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Derived constructions
// ---------------------------------------------------------------------------

namespace detail {

/// Cumulative integral of a positive density over the log grid, PCHIP-cached.
/// The initial segment [0, grid.front()] is integrated adaptively as well so
/// that the cache carries absolute values, not offsets.
inline std::shared_ptr<LogGridCurve>
cache_antiderivative(const std::function<double(double)>& density, double lo, double hi) {
    auto grid = log_grid(lo, hi);
    std::vector<double> y(grid.size());
    double acc = integrate(density, 0.0, grid.front(), 1e-9);
    y[0] = acc;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        acc += integrate(density, grid[i], grid[i + 1], 1e-9);
        y[i + 1] = acc;
    }
    return std::make_shared<LogGridCurve>(std::move(grid), std::move(y));
}

} // namespace detail

/// Pointwise shifted value phi_a(t) = int_0^t phi'(a+s) s/(a+s) ds by direct
/// adaptive quadrature; used where a changes every call and a cached shift
/// object would be wasted.
inline double shifted_value(const NFunction& phi, double a, double t) {
    if (t <= 0.0) return 0.0;
    auto deriv = phi.raw_deriv;
    return integrate([deriv, a](double s) { return deriv(a + s) * s / (a + s); }, 0.0, t,
                     1e-9);
}

/// Shifted derivative phi'_a(t) = phi'(a+t) t/(a+t).
inline double shifted_deriv(const NFunction& phi, double a, double t) {
    if (t <= 0.0) return 0.0;
    return phi.raw_deriv(a + t) * t / (a + t);
}

/// The shifted N-function phi_a.  Derivative and second derivative are closed
/// forms in phi' and phi''; values come from a cumulative quadrature cache.
inline NFunction shift(const NFunction& phi, double a) {
    if (a < 0.0) throw NFunctionError("shift amount must be non-negative");
    NFunction f;
    f.kind = NKind::shifted;
    f.t_min = phi.t_min;
    f.t_max = phi.t_max;
    f.name = phi.name + " shifted(a=" + std::to_string(a) + ")";
    auto d = phi.raw_deriv;
    auto dd = phi.raw_second;
    f.raw_deriv = [d, a](double t) { return t <= 0.0 ? 0.0 : d(a + t) * t / (a + t); };
    // phi_a'' = phi''(a+t) t/(a+t) + phi'(a+t) a/(a+t)^2
    f.raw_second = [d, dd, a](double t) {
        const double u = a + t;
        return dd(u) * t / u + d(u) * a / (u * u);
    };
    auto cache = detail::cache_antiderivative(f.raw_deriv, f.t_min, f.t_max);
    auto density = f.raw_deriv;
    f.raw_value = [cache, density](double t) {
        if (t <= 0.0) return 0.0;
        if (t < cache->t_front() || t > cache->t_back())
            return integrate(density, 0.0, t, 1e-9);
        return cache->eval(t);
    };
    return f;
}

namespace detail {

/// Inverse of an increasing map with g(0) = 0.  The bracket is grown and then
/// shrunk geometrically from the validity endpoint until it is one octave
/// wide, so the subsequent 80 bisections resolve the answer relatively (a
/// fixed bracket would lose all precision for targets many decades below the
/// endpoint).
inline double bisect_inverse(const std::function<double(double)>& g, double target,
                             double hi_start) {
    if (!(target > 0.0)) return 0.0;
    double hi = hi_start;
    int grow = 0;
    while (g(hi) < target && grow++ < 200) hi *= 2.0;
    int shrink = 0;
    while (hi > 1e-300 && g(0.5 * hi) >= target && shrink++ < 2400) hi *= 0.5;
    if (hi <= 1e-300) return 0.0;
    double lo = 0.5 * hi;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Complementary (conjugate) N-function phi*(t) = int_0^t (phi')^{-1}(s) ds.
///
/// (phi')^{-1} is computed by monotone bisection and cached; phi* accumulates
/// it by quadrature.  The validity window maps to [phi'(t_min), phi'(t_max)].
/// Throws if phi' fails a sampled strict-monotonicity check, naming the pair.
inline NFunction conjugate(const NFunction& phi) {
    // Monotonicity sampling; bisection is only safe on increasing data.
    {
        auto ts = detail::log_grid(phi.t_min, phi.t_max);
        const std::size_t stride = std::max<std::size_t>(1, ts.size() / 64);
        double prev_t = ts.front(), prev_v = phi.raw_deriv(prev_t);
        for (std::size_t i = stride; i < ts.size(); i += stride) {
            const double v = phi.raw_deriv(ts[i]);
            if (!(v > prev_v))
                throw NFunctionError("phi' is not strictly increasing between t = " +
                                     std::to_string(prev_t) + " and t = " +
                                     std::to_string(ts[i]) + " (" + phi.name + ")");
            prev_t = ts[i];
            prev_v = v;
        }
    }

    NFunction f;
    f.kind = NKind::conjugate_numeric;
    f.name = "conjugate(" + phi.name + ")";
    f.t_min = phi.raw_deriv(phi.t_min);
    f.t_max = phi.raw_deriv(phi.t_max);

    auto d = phi.raw_deriv;
    auto dd = phi.raw_second;
    const double hi_start = phi.t_max;

    auto inv_grid = detail::log_grid(f.t_min, f.t_max);
    std::vector<double> inv_vals(inv_grid.size());
    for (std::size_t i = 0; i < inv_grid.size(); ++i)
        inv_vals[i] = detail::bisect_inverse(d, inv_grid[i], hi_start);
    auto inv_cache =
        std::make_shared<detail::LogGridCurve>(inv_grid, std::move(inv_vals));

    f.raw_deriv = [inv_cache, d, hi_start](double s) {
        if (s <= 0.0) return 0.0;
        if (s < inv_cache->t_front() || s > inv_cache->t_back())
            return detail::bisect_inverse(d, s, hi_start);
        return inv_cache->eval(s);
    };
    f.raw_second = [f_deriv = f.raw_deriv, dd](double s) {
        const double x = f_deriv(s);
        const double curv = dd(x);
        return curv > 0.0 ? 1.0 / curv : 0.0;
    };
    auto cache = detail::cache_antiderivative(f.raw_deriv, f.t_min, f.t_max);
    auto density = f.raw_deriv;
    f.raw_value = [cache, density](double s) {
        if (s <= 0.0) return 0.0;
        if (s < cache->t_front() || s > cache->t_back())
            return integrate(density, 0.0, s, 1e-9);
        return cache->eval(s);
    };
    return f;
}

/// The associated N-function psi with psi'(t) = sqrt(phi'(t) t).
inline NFunction associated_psi(const NFunction& phi) {
    NFunction f;
    f.kind = NKind::psi_derived;
    f.t_min = phi.t_min;
    f.t_max = phi.t_max;
    f.name = "psi(" + phi.name + ")";
    auto d = phi.raw_deriv;
    auto dd = phi.raw_second;
    f.raw_deriv = [d](double t) { return t <= 0.0 ? 0.0 : std::sqrt(d(t) * t); };
    f.raw_second = [d, dd](double t) {
        const double s = std::sqrt(d(t) * t);
        return s > 0.0 ? (dd(t) * t + d(t)) / (2.0 * s) : 0.0;
    };
    auto cache = detail::cache_antiderivative(f.raw_deriv, f.t_min, f.t_max);
    auto density = f.raw_deriv;
    f.raw_value = [cache, density](double t) {
        if (t <= 0.0) return 0.0;
        if (t < cache->t_front() || t > cache->t_back())
            return integrate(density, 0.0, t, 1e-9);
        return cache->eval(t);
    };
    return f;
}

// ---------------------------------------------------------------------------
// Measured characteristics and growth envelope
// ---------------------------------------------------------------------------

/// Sampled bounds of phi'(t)/(t phi''(t)) and Delta_2 estimates for phi, phi*.
struct Characteristics {
    double ratio_lo = 0.0, ratio_hi = 0.0;
    double delta2_phi = 1.0, delta2_conj = 1.0;
};

inline Characteristics characteristics_estimate(const NFunction& phi, int samples) {
    if (samples < 2) throw NFunctionError("characteristics_estimate needs >= 2 samples");
    Characteristics c;
    c.ratio_lo = std::numeric_limits<double>::infinity();
    c.ratio_hi = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double t =
            phi.t_min * std::pow(phi.t_max / phi.t_min, double(i) / (samples - 1));
        const double dd = phi.raw_second(t);
        if (!(dd > 0.0))
            throw NFunctionError("phi'' <= 0 at t = " + std::to_string(t) +
                                 "; growth assumption violated (" + phi.name + ")");
        const double r = phi.raw_deriv(t) / (t * dd);
        c.ratio_lo = std::min(c.ratio_lo, r);
        c.ratio_hi = std::max(c.ratio_hi, r);
    }
    auto delta2 = [samples](const NFunction& g) {
        double worst = 1.0;
        const double lo = g.t_min, hi = g.t_max / 2.0;
        for (int i = 0; i < samples; ++i) {
            const double t = lo * std::pow(hi / lo, double(i) / (samples - 1));
            worst = std::max(worst, g.raw_value(2.0 * t) / g.raw_value(t));
        }
        return worst;
    };
    c.delta2_phi = delta2(phi);
    c.delta2_conj = delta2(conjugate(phi));
    return c;
}

/// Type-(p0,p1) envelope phi(st) <= C1 max(s^p0, s^p1) phi(t), together with
/// samples of the quasi-concave profile h from the representation
/// h(u) = phi(u^{1/(p1-p0)}) u^{-p0/(p1-p0)}.
struct GrowthEnvelope {
    double p0 = 1.0, p1 = 2.0;
    double c1 = 1.0;
    double envelope_worst = 0.0;   // measured sup of phi(st)/(max(s^p0,s^p1) phi(t))
    double c2_measured = 0.0;      // measured sup of h(lambda t)/(max(1,lambda) h(t))
    std::vector<std::pair<double, double>> h_samples;
};

/// Exponents from the measured Delta_2 data: p1 = log2 Delta_2(phi) controls
/// dyadic upscaling, p0 = ln K* / ln(K*/2) with K* = max(Delta_2(phi*), 3)
/// controls downscaling (via the conjugate Delta_2), widened to keep a strict
/// gap so the h-representation is defined.
inline GrowthEnvelope type_decomposition(const NFunction& phi, int samples = 512) {
    Characteristics ch = characteristics_estimate(phi, samples);
    if (!std::isfinite(ch.delta2_phi) || !std::isfinite(ch.delta2_conj))
        throw NFunctionError("Delta_2 estimates not finite for " + phi.name);
    // 2% headroom: sampled suprema underestimate the true Delta_2 constants.
    const double k = 1.02 * std::max(ch.delta2_phi, 2.0);
    const double kc = std::max(1.02 * ch.delta2_conj, 3.0);

    GrowthEnvelope env;
    env.p0 = std::log(kc) / std::log(kc / 2.0);
    env.p1 = std::max(std::log2(k), env.p0 + 0.5);
    env.c1 = std::max(k, kc);

    const double lo = phi.t_min * 1e2, hi = phi.t_max * 1e-2;
    const int n = 48;
    env.envelope_worst = 0.0;
    double worst_s = 0.0, worst_t = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = lo * std::pow(hi / lo, double(i) / (n - 1));
        for (int j = 0; j < n; ++j) {
            const double s = 1e-4 * std::pow(1e8, double(j) / (n - 1));
            if (s * t < phi.t_min || s * t > phi.t_max) continue;
            const double bound = std::max(std::pow(s, env.p0), std::pow(s, env.p1));
            const double r = phi.raw_value(s * t) / (bound * phi.raw_value(t));
            if (r > env.envelope_worst) {
                env.envelope_worst = r;
                worst_s = s;
                worst_t = t;
            }
        }
    }
    if (env.envelope_worst > env.c1 * (1.0 + 1e-9))
        throw NFunctionError("growth envelope violated: phi(st) > C1 max(s^p0,s^p1) "
                             "phi(t) at s = " + std::to_string(worst_s) + ", t = " +
                             std::to_string(worst_t) + " (ratio " +
                             std::to_string(env.envelope_worst) + ", C1 " +
                             std::to_string(env.c1) + ")");

    const double expo = 1.0 / (env.p1 - env.p0);
    auto h = [&](double u) {
        return phi.raw_value(std::pow(u, expo)) * std::pow(u, -env.p0 * expo);
    };
    const double ulo = std::pow(lo, env.p1 - env.p0), uhi = std::pow(hi, env.p1 - env.p0);
    env.h_samples.reserve(64);
    for (int i = 0; i < 64; ++i) {
        const double u = ulo * std::pow(uhi / ulo, double(i) / 63.0);
        env.h_samples.emplace_back(u, h(u));
    }
    env.c2_measured = 0.0;
    for (const auto& [u, hu] : env.h_samples)
        for (int j = 0; j < 17; ++j) {
            const double lam = std::pow(10.0, -2.0 + 0.25 * j);
            if (u * lam < ulo || u * lam > uhi) continue;
            env.c2_measured =
                std::max(env.c2_measured, h(lam * u) / (std::max(1.0, lam) * hu));
        }
    return env;
}

/// Young's inequality residual phi(t) + phi*(s) - t s; non-negative, zero at
/// s = phi'(t).
inline double young_gap(const NFunction& phi, const NFunction& phi_conj, double t,
                        double s) {
    return phi.value(t) + phi_conj.value(s) - t * s;
}

inline double young_gap(const NFunction& phi, double t, double s) {
    return young_gap(phi, conjugate(phi), t, s);
}

} // namespace orlicz
