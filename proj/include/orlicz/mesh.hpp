#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "orlicz/algebra.hpp"

namespace orlicz {

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Ball {
    Vec2 center;
    double radius = 0.0;

    Ball scaled(double lambda) const { return {center, lambda * radius}; }
    bool contains(Vec2 p) const { return (p - center).norm2() <= radius * radius; }
};

/// Triangulated planar domain.  build_mesh produces the crossed-diagonal
/// triangulation of the square [-L,L]^2; restrict_to_ball produces polygonal
/// sub-meshes.  Triangles are counterclockwise; geometry caches are built once
/// and the mesh is immutable afterwards.
struct TriMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> boundary_nodes;
    std::vector<char> is_boundary; // per vertex
    double h = 0.0;                // target edge length
    double half_width = 0.0;       // L for square builds, 0 for sub-meshes

    // per-triangle caches
    std::vector<double> area;
    std::vector<Vec2> centroid;
    std::vector<std::array<Vec2, 3>> basis_grad; // gradients of the P1 hats

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }

    double total_area() const {
        double s = 0.0;
        for (double a : area) s += a;
        return s;
    }

    void finalize() {
        const std::size_t nt = triangles.size();
        area.resize(nt);
        centroid.resize(nt);
        basis_grad.resize(nt);
        for (std::size_t t = 0; t < nt; ++t) {
            const Vec2 x0 = vertices[triangles[t][0]];
            const Vec2 x1 = vertices[triangles[t][1]];
            const Vec2 x2 = vertices[triangles[t][2]];
            const double a2 = cross(x1 - x0, x2 - x0);
            if (a2 <= 0.0)
                throw MeshError("triangle " + std::to_string(t) +
                                " is not positively oriented");
            area[t] = 0.5 * a2;
            centroid[t] = (x0 + x1 + x2) / 3.0;
            auto rot90 = [](Vec2 v) { return Vec2{-v.y, v.x}; };
            basis_grad[t][0] = rot90(x2 - x1) / a2;
            basis_grad[t][1] = rot90(x0 - x2) / a2;
            basis_grad[t][2] = rot90(x1 - x0) / a2;
        }
        compute_boundary_();
    }

private:
    void compute_boundary_() {
        // topological boundary: edges incident to exactly one triangle
        std::map<std::pair<int, int>, int> edge_count;
        for (const auto& tri : triangles)
            for (int k = 0; k < 3; ++k) {
                int a = tri[k], b = tri[(k + 1) % 3];
                if (a > b) std::swap(a, b);
                ++edge_count[{a, b}];
            }
        is_boundary.assign(vertices.size(), 0);
        for (const auto& [edge, count] : edge_count)
            if (count == 1) {
                is_boundary[edge.first] = 1;
                is_boundary[edge.second] = 1;
            }
        boundary_nodes.clear();
        for (std::size_t v = 0; v < vertices.size(); ++v)
            if (is_boundary[v]) boundary_nodes.push_back(static_cast<int>(v));
    }
};

/// Structured crossed-diagonal triangulation of [-L,L]^2 with ~(2L/h+1)^2
/// vertices.  The diagonal direction alternates per cell.
inline std::shared_ptr<TriMesh> build_mesh(double L, double h) {
    if (!(h > 0.0) || !(h <= L))
        throw MeshError("mesh spacing must satisfy 0 < h <= L (got h = " +
                        std::to_string(h) + ", L = " + std::to_string(L) + ")");
    const int m = static_cast<int>(std::lround(2.0 * L / h));
    const long long nv = static_cast<long long>(m + 1) * (m + 1);
    if (nv > 10'000'000)
        throw MeshError("refusing to build a mesh with " + std::to_string(nv) +
                        " vertices");
    auto mesh = std::make_shared<TriMesh>();
    mesh->h = 2.0 * L / m;
    mesh->half_width = L;
    mesh->vertices.reserve(static_cast<std::size_t>(nv));
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i <= m; ++i)
            mesh->vertices.push_back({-L + i * mesh->h, -L + j * mesh->h});
    auto vid = [m](int i, int j) { return j * (m + 1) + i; };
    mesh->triangles.reserve(2 * static_cast<std::size_t>(m) * m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1),
                      d = vid(i, j + 1);
            if ((i + j) % 2 == 0) {
                mesh->triangles.push_back({a, b, c});
                mesh->triangles.push_back({a, c, d});
            } else {
                mesh->triangles.push_back({a, b, d});
                mesh->triangles.push_back({b, c, d});
            }
        }
    mesh->finalize();
    return mesh;
}

namespace detail {

inline double point_segment_dist2(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 d = b - a;
    const double dd = d.dot(d);
    double t = dd > 0.0 ? (p - a).dot(d) / dd : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + d * t)).norm2();
}

inline bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
    const double s1 = cross(b - a, p - a);
    const double s2 = cross(c - b, p - b);
    const double s3 = cross(a - c, p - c);
    return s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0;
}

/// Distance-based disjointness: the disc misses the triangle iff the center's
/// distance to the (convex) triangle is at least the radius.
inline bool triangle_outside_ball(Vec2 a, Vec2 b, Vec2 c, const Ball& ball) {
    if (point_in_triangle(ball.center, a, b, c)) return false;
    const double r2 = ball.radius * ball.radius;
    return point_segment_dist2(ball.center, a, b) >= r2 &&
           point_segment_dist2(ball.center, b, c) >= r2 &&
           point_segment_dist2(ball.center, c, a) >= r2;
}

template <class CB>
inline void clipped_leaves(Vec2 a, Vec2 b, Vec2 c, const Ball& ball, int level,
                           const CB& cb) {
    const bool ina = ball.contains(a), inb = ball.contains(b), inc = ball.contains(c);
    const double leaf_area = 0.5 * cross(b - a, c - a);
    if (ina && inb && inc) {
        // fully covered: mid-edge rule, exact through quadratics
        const double w = leaf_area / 3.0;
        cb((a + b) * 0.5, w);
        cb((b + c) * 0.5, w);
        cb((c + a) * 0.5, w);
        return;
    }
    if (triangle_outside_ball(a, b, c, ball)) return;
    if (level == 0) {
        const Vec2 g = (a + b + c) / 3.0;
        if (ball.contains(g)) cb(g, leaf_area);
        return;
    }
    const Vec2 ab = (a + b) * 0.5, bc = (b + c) * 0.5, ca = (c + a) * 0.5;
    clipped_leaves(a, ab, ca, ball, level - 1, cb);
    clipped_leaves(ab, b, bc, ball, level - 1, cb);
    clipped_leaves(ca, bc, c, ball, level - 1, cb);
    clipped_leaves(ab, bc, ca, ball, level - 1, cb);
}

} // namespace detail

/// Visits quadrature points (tri, point, weight) of B intersected with the
/// mesh.  Interior triangles get the 3-point mid-edge rule; rim triangles are
/// subdivided twice with centroid inclusion tests (about 1e-3 relative area
/// accuracy on the balls used here).
template <class CB>
inline void clipped_quadrature(const TriMesh& mesh, const Ball& ball, const CB& cb) {
    const double r = ball.radius;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const double reach = r + 2.0 * std::sqrt(mesh.area[t]);
        if ((mesh.centroid[t] - ball.center).norm2() > reach * reach) continue;
        const Vec2 a = mesh.vertices[mesh.triangles[t][0]];
        const Vec2 b = mesh.vertices[mesh.triangles[t][1]];
        const Vec2 c = mesh.vertices[mesh.triangles[t][2]];
        detail::clipped_leaves(a, b, c, ball, 2,
                               [&](Vec2 p, double w) { cb(t, p, w); });
    }
}

/// Mid-edge quadrature over the whole mesh.
template <class CB>
inline void domain_quadrature(const TriMesh& mesh, const CB& cb) {
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const Vec2 a = mesh.vertices[mesh.triangles[t][0]];
        const Vec2 b = mesh.vertices[mesh.triangles[t][1]];
        const Vec2 c = mesh.vertices[mesh.triangles[t][2]];
        const double w = mesh.area[t] / 3.0;
        cb(t, (a + b) * 0.5, w);
        cb(t, (b + c) * 0.5, w);
        cb(t, (c + a) * 0.5, w);
    }
}

/// Clipped area |B ∩ domain|.
inline double clipped_area(const TriMesh& mesh, const Ball& ball) {
    double s = 0.0;
    clipped_quadrature(mesh, ball, [&](std::size_t, Vec2, double w) { s += w; });
    return s;
}

/// Sub-mesh of the triangles whose centroid lies in B, with parent index maps.
struct SubMesh {
    std::shared_ptr<TriMesh> mesh;
    std::vector<int> vertex_of_parent; // sub vertex -> parent vertex
    std::vector<int> tri_of_parent;    // sub triangle -> parent triangle
    std::vector<int> parent_vertex_of; // parent vertex -> sub vertex or -1

    std::size_t interior_vertex_count() const {
        std::size_t n = 0;
        for (std::size_t v = 0; v < mesh->vertex_count(); ++v)
            if (!mesh->is_boundary[v]) ++n;
        return n;
    }
};

inline SubMesh restrict_to_ball(const std::shared_ptr<const TriMesh>& parent,
                                const Ball& ball) {
    SubMesh sub;
    sub.mesh = std::make_shared<TriMesh>();
    sub.mesh->h = parent->h;
    sub.parent_vertex_of.assign(parent->vertex_count(), -1);
    for (std::size_t t = 0; t < parent->triangle_count(); ++t) {
        if (!ball.contains(parent->centroid[t])) continue;
        std::array<int, 3> local{};
        for (int k = 0; k < 3; ++k) {
            const int pv = parent->triangles[t][k];
            if (sub.parent_vertex_of[pv] < 0) {
                sub.parent_vertex_of[pv] = static_cast<int>(sub.mesh->vertices.size());
                sub.mesh->vertices.push_back(parent->vertices[pv]);
                sub.vertex_of_parent.push_back(pv);
            }
            local[k] = sub.parent_vertex_of[pv];
        }
        sub.mesh->triangles.push_back(local);
        sub.tri_of_parent.push_back(static_cast<int>(t));
    }
    if (sub.mesh->triangles.empty())
        throw MeshError("ball does not cover any triangle centroid");
    sub.mesh->finalize();
    return sub;
}

} // namespace orlicz
