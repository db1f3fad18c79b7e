#pragma once

#include <cmath>

#include "orlicz/algebra.hpp"
#include "orlicz/nfunction.hpp"
#include "orlicz/quadrature.hpp"

namespace orlicz {

/// A(Q) = phi'(|Q|) Q/|Q|, A(0) = 0.
inline Mat22 a_map(const NFunction& phi, const Mat22& q) {
    const double n = q.norm();
    if (n == 0.0) return {};
    return q * (phi.deriv(n) / n);
}

/// V(Q) = psi'(|Q|) Q/|Q| with psi'(t) = sqrt(phi'(t) t), V(0) = 0.
inline Mat22 v_map(const NFunction& phi, const Mat22& q) {
    const double n = q.norm();
    if (n == 0.0) return {};
    return q * (std::sqrt(phi.deriv(n) * n) / n);
}

/// |V(Q)|^2 = phi'(|Q|) |Q| without forming the matrix.
inline double v_map_norm2(const NFunction& phi, const Mat22& q) {
    const double n = q.norm();
    return n == 0.0 ? 0.0 : phi.deriv(n) * n;
}

struct HammerRatios {
    double r1 = 1.0; // (A(P)-A(Q)):(P-Q) / |V(P)-V(Q)|^2
    double r2 = 1.0; // |V(P)-V(Q)|^2  / phi_{|P|}(|P-Q|)
    double r3 = 1.0; // |A(P)-A(Q)|    / phi'_{|P|}(|P-Q|)
};

/// The three comparison ratios tying the monotonicity product, the V-distance
/// and the shifted modular of |P-Q| to each other.  P = Q returns {1,1,1},
/// the 0/0 limit.
inline HammerRatios hammer_ratios(const NFunction& phi, const Mat22& p, const Mat22& q) {
    HammerRatios r;
    const Mat22 diff = p - q;
    const double dn = diff.norm();
    if (dn == 0.0) return r;
    const Mat22 da = a_map(phi, p) - a_map(phi, q);
    const Mat22 dv = v_map(phi, p) - v_map(phi, q);
    const double mono = da.dot(diff);
    const double v2 = dv.dot(dv);
    const double a = p.norm();
    r.r1 = mono / v2;
    r.r2 = v2 / shifted_value(phi, a, dn);
    r.r3 = da.norm() / shifted_deriv(phi, a, dn);
    return r;
}

/// Ratio of the segment average int_0^1 phi'(|P_theta|)/|P_theta| dtheta,
/// P_theta = (1-theta) P0 + theta P1, against phi'(|P0|+|P1|)/(|P0|+|P1|).
/// The integrand has an integrable singularity when the segment crosses the
/// origin; the interval is split at the closest point before refining.
inline double segment_average_ratio(const NFunction& phi, const Mat22& p0,
                                    const Mat22& p1, int quad_panels = 4096) {
    const double s = p0.norm() + p1.norm();
    if (s == 0.0) throw NFunctionError("segment_average_ratio needs |P0|+|P1| > 0");
    auto deriv = phi.raw_deriv;
    auto integrand = [&](double th) {
        const Mat22 pt = p0 * (1.0 - th) + p1 * th;
        const double n = pt.norm();
        if (n == 0.0) return 0.0; // measure-zero point, never hit by the rule
        return deriv(n) / n;
    };
    // theta minimizing |P_theta|: projection of the segment onto the origin.
    const Mat22 d = p1 - p0;
    const double dd = d.dot(d);
    double split = dd > 0.0 ? -p0.dot(d) / dd : 0.5;
    double num;
    if (split > 1e-12 && split < 1.0 - 1e-12)
        num = integrate(integrand, 0.0, split, 1e-7, quad_panels) +
              integrate(integrand, split, 1.0, 1e-7, quad_panels);
    else
        num = integrate(integrand, 0.0, 1.0, 1e-7, quad_panels);
    return num / (deriv(s) / s);
}

} // namespace orlicz
