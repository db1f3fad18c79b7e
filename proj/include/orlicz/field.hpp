#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "orlicz/algebra.hpp"
#include "orlicz/mesh.hpp"
#include "orlicz/nfunction.hpp"

namespace orlicz {

struct FieldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Vector-valued (R^2) piecewise-linear function on a triangulation.
struct FieldP1 {
    std::shared_ptr<const TriMesh> mesh;
    std::vector<Vec2> values;

    FieldP1() = default;
    explicit FieldP1(std::shared_ptr<const TriMesh> m)
        : mesh(std::move(m)), values(mesh->vertex_count()) {}

    /// Value by barycentric interpolation inside triangle t.
    Vec2 eval_in(std::size_t t, Vec2 p) const {
        const auto& tri = mesh->triangles[t];
        const Vec2 a = mesh->vertices[tri[0]], b = mesh->vertices[tri[1]],
                   c = mesh->vertices[tri[2]];
        const double inv = 1.0 / cross(b - a, c - a);
        const double l0 = cross(b - p, c - p) * inv;
        const double l1 = cross(c - p, a - p) * inv;
        const double l2 = 1.0 - l0 - l1;
        return values[tri[0]] * l0 + values[tri[1]] * l1 + values[tri[2]] * l2;
    }

    FieldP1& operator+=(const FieldP1& o) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
        return *this;
    }
    FieldP1 operator*(double s) const {
        FieldP1 r = *this;
        for (auto& v : r.values) v = v * s;
        return r;
    }
    FieldP1 operator-(const FieldP1& o) const {
        FieldP1 r = *this;
        for (std::size_t i = 0; i < values.size(); ++i) r.values[i] -= o.values[i];
        return r;
    }
};

/// q(x) = Q x + b; the linear comparison polynomials of the Caccioppoli and
/// excess estimates.
struct AffineField {
    Mat22 Q;
    Vec2 b;
    Vec2 eval(Vec2 x) const { return Q.apply(x) + b; }
};

inline FieldP1 interpolate(std::shared_ptr<const TriMesh> mesh,
                           const std::function<Vec2(Vec2)>& f) {
    FieldP1 u(std::move(mesh));
    for (std::size_t v = 0; v < u.mesh->vertex_count(); ++v)
        u.values[v] = f(u.mesh->vertices[v]);
    return u;
}

inline FieldP1 interpolate(std::shared_ptr<const TriMesh> mesh, const AffineField& q) {
    return interpolate(std::move(mesh), [&q](Vec2 x) { return q.eval(x); });
}

/// Exact piecewise-constant gradient, one N x 2 matrix per triangle.
inline std::vector<Mat22> gradient(const FieldP1& u) {
    const TriMesh& m = *u.mesh;
    std::vector<Mat22> g(m.triangle_count());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        Mat22 gt;
        for (int k = 0; k < 3; ++k) {
            const Vec2 val = u.values[m.triangles[t][k]];
            const Vec2 bg = m.basis_grad[t][k];
            gt.e[0][0] += val.x * bg.x;
            gt.e[0][1] += val.x * bg.y;
            gt.e[1][0] += val.y * bg.x;
            gt.e[1][1] += val.y * bg.y;
        }
        g[t] = gt;
    }
    return g;
}

inline std::vector<double> magnitudes(const std::vector<Mat22>& g) {
    std::vector<double> m(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = g[i].norm();
    return m;
}

// ---------------------------------------------------------------------------
// Ball-restricted averages
// ---------------------------------------------------------------------------

/// Area-weighted average of per-triangle scalars over B ∩ domain.
inline double ball_average(const TriMesh& mesh, const std::vector<double>& tri_data,
                           const Ball& ball) {
    double num = 0.0, den = 0.0;
    clipped_quadrature(mesh, ball, [&](std::size_t t, Vec2, double w) {
        num += w * tri_data[t];
        den += w;
    });
    if (den == 0.0) throw MeshError("ball does not intersect the domain");
    return num / den;
}

inline Mat22 ball_average(const TriMesh& mesh, const std::vector<Mat22>& tri_data,
                          const Ball& ball) {
    Mat22 num;
    double den = 0.0;
    clipped_quadrature(mesh, ball, [&](std::size_t t, Vec2, double w) {
        num += tri_data[t] * w;
        den += w;
    });
    if (den == 0.0) throw MeshError("ball does not intersect the domain");
    return num * (1.0 / den);
}

/// Average of a P1 field over B ∩ domain.
inline Vec2 ball_average(const FieldP1& u, const Ball& ball) {
    Vec2 num;
    double den = 0.0;
    clipped_quadrature(*u.mesh, ball, [&](std::size_t t, Vec2 p, double w) {
        num += u.eval_in(t, p) * w;
        den += w;
    });
    if (den == 0.0) throw MeshError("ball does not intersect the domain");
    return num / den;
}

/// Average of per-vertex scalars (interpreted P1) over B ∩ domain.
inline double ball_average_vertex(const TriMesh& mesh, const std::vector<double>& data,
                                  const Ball& ball) {
    double num = 0.0, den = 0.0;
    clipped_quadrature(mesh, ball, [&](std::size_t t, Vec2 p, double w) {
        const auto& tri = mesh.triangles[t];
        const Vec2 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]],
                   c = mesh.vertices[tri[2]];
        const double inv = 1.0 / cross(b - a, c - a);
        const double l0 = cross(b - p, c - p) * inv;
        const double l1 = cross(c - p, a - p) * inv;
        num += w * (data[tri[0]] * l0 + data[tri[1]] * l1 +
                    data[tri[2]] * (1.0 - l0 - l1));
        den += w;
    });
    if (den == 0.0) throw MeshError("ball does not intersect the domain");
    return num / den;
}

// ---------------------------------------------------------------------------
// Modulars and the Luxemburg norm
// ---------------------------------------------------------------------------

using Region = std::optional<Ball>; // nullopt: whole domain

/// Modular int_region psi(|g|) dx for per-triangle scalar magnitudes.
inline double modular(const NFunction& psi, const TriMesh& mesh,
                      const std::vector<double>& tri_mag, const Region& region = {}) {
    double s = 0.0;
    auto add = [&](std::size_t t, Vec2, double w) {
        const double m = std::abs(tri_mag[t]);
        if (m > 0.0) s += w * psi.value(m);
    };
    if (region)
        clipped_quadrature(mesh, *region, add);
    else
        domain_quadrature(mesh, add);
    return s;
}

/// Modular of a pointwise magnitude function (P1 data, shifted arguments...).
inline double modular_fn(const NFunction& psi, const TriMesh& mesh,
                         const std::function<double(std::size_t, Vec2)>& mag,
                         const Region& region = {}) {
    double s = 0.0;
    auto add = [&](std::size_t t, Vec2 p, double w) {
        const double m = mag(t, p);
        if (m > 0.0) s += w * psi.value(m);
    };
    if (region)
        clipped_quadrature(mesh, *region, add);
    else
        domain_quadrature(mesh, add);
    return s;
}

namespace detail {

template <class ModularFn>
inline double luxemburg_bisect(const ModularFn& modular_of_scale, double scale_hint) {
    double lam = scale_hint > 0.0 ? scale_hint : 1.0;
    int steps = 0;
    while (modular_of_scale(lam) > 1.0 && steps++ < 200) lam *= 2.0;
    double hi = lam;
    steps = 0;
    double lo = hi;
    while (modular_of_scale(lo * 0.5) <= 1.0 && steps++ < 400 && lo > 1e-300) lo *= 0.5;
    lo *= 0.5;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (modular_of_scale(mid) > 1.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Luxemburg norm inf{ lambda > 0 : int psi(|g|/lambda) <= 1 } by bisection.
inline double luxemburg_norm(const NFunction& psi, const TriMesh& mesh,
                             const std::vector<double>& tri_mag,
                             const Region& region = {}) {
    double sup = 0.0;
    for (double m : tri_mag) sup = std::max(sup, std::abs(m));
    if (sup == 0.0) return 0.0;
    return detail::luxemburg_bisect(
        [&](double lam) {
            return modular_fn(
                psi, mesh,
                [&](std::size_t t, Vec2) { return std::abs(tri_mag[t]) / lam; }, region);
        },
        sup);
}

// ---------------------------------------------------------------------------
// CSV import/export
// ---------------------------------------------------------------------------

inline void export_field_csv(const FieldP1& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FieldError("cannot open " + path + " for writing");
    out << "index,x,y,u0,u1\n";
    char line[160];
    for (std::size_t v = 0; v < u.mesh->vertex_count(); ++v) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", v,
                      u.mesh->vertices[v].x, u.mesh->vertices[v].y, u.values[v].x,
                      u.values[v].y);
        out << line;
    }
}

/// Reads nodal values back onto an existing mesh (geometry must match).
inline FieldP1 import_field_csv(std::shared_ptr<const TriMesh> mesh,
                                const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FieldError("cannot open " + path);
    FieldP1 u(std::move(mesh));
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t idx;
        double x, y, u0, u1;
        if (std::sscanf(line.c_str(), "%zu,%lg,%lg,%lg,%lg", &idx, &x, &y, &u0, &u1) != 5)
            throw FieldError("malformed field CSV line: " + line);
        if (idx >= u.values.size()) throw FieldError("vertex index out of range");
        if (std::abs(x - u.mesh->vertices[idx].x) > 1e-12 ||
            std::abs(y - u.mesh->vertices[idx].y) > 1e-12)
            throw FieldError("field CSV does not match the mesh geometry");
        u.values[idx] = {u0, u1};
    }
    return u;
}

inline void export_mesh_edges_csv(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FieldError("cannot open " + path + " for writing");
    out << "v0,v1\n";
    std::map<std::pair<int, int>, bool> seen;
    for (const auto& tri : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            int a = tri[k], b = tri[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            if (seen.emplace(std::make_pair(a, b), true).second)
                out << a << ',' << b << '\n';
        }
}

} // namespace orlicz
