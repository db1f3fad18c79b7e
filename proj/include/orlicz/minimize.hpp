#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "orlicz/field.hpp"
#include "orlicz/integrand.hpp"
#include "orlicz/mesh.hpp"

namespace orlicz {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverConfig {
    int max_iters = 100;
    double residual_tol = 1e-8;   // max nodal dual residual
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    double newton_floor = 1e-8;   // D2f ray substitution below this |Q|
};

/// Dirichlet problem for F(u) = int f(grad u).  `data` supplies both the
/// boundary values (rows at boundary nodes) and the initial interior iterate.
struct DirichletProblem {
    Integrand integrand;
    std::shared_ptr<const TriMesh> mesh;
    FieldP1 data;
};

inline double energy(const Integrand& f, const FieldP1& u) {
    const TriMesh& m = *u.mesh;
    auto g = gradient(u);
    double e = 0.0;
    for (std::size_t t = 0; t < m.triangle_count(); ++t) e += m.area[t] * f.f(g[t]);
    return e;
}

inline double energy(const DirichletProblem& p, const FieldP1& u) {
    return energy(p.integrand, u);
}

/// First variation int Df(grad u) : grad xi, exact per triangle.  xi must
/// vanish on the boundary nodes.
inline double el_residual(const DirichletProblem& p, const FieldP1& u,
                          const FieldP1& xi) {
    const TriMesh& m = *p.mesh;
    for (int v : m.boundary_nodes)
        if (xi.values[v].norm2() > 0.0)
            throw SolverError("test field does not vanish on the boundary (node " +
                              std::to_string(v) + ")");
    auto gu = gradient(u);
    auto gxi = gradient(xi);
    double r = 0.0;
    for (std::size_t t = 0; t < m.triangle_count(); ++t)
        r += m.area[t] * p.integrand.df(gu[t]).dot(gxi[t]);
    return r;
}

struct MinimizeResult {
    FieldP1 u;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::string message;
};

namespace detail {

struct DofMap {
    std::vector<int> of_vertex; // vertex -> dof of component 0, or -1
    int count = 0;

    explicit DofMap(const TriMesh& m) : of_vertex(m.vertex_count(), -1) {
        for (std::size_t v = 0; v < m.vertex_count(); ++v)
            if (!m.is_boundary[v]) {
                of_vertex[v] = count;
                count += 2;
            }
    }
};

inline void assemble_gradient(const DirichletProblem& p, const FieldP1& u,
                              const DofMap& dofs, Eigen::VectorXd& g) {
    const TriMesh& m = *p.mesh;
    g.setZero(dofs.count);
    auto gu = gradient(u);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        const Mat22 s = p.integrand.df(gu[t]) * m.area[t];
        for (int k = 0; k < 3; ++k) {
            const int dof = dofs.of_vertex[m.triangles[t][k]];
            if (dof < 0) continue;
            const Vec2 bg = m.basis_grad[t][k];
            g[dof] += s.e[0][0] * bg.x + s.e[0][1] * bg.y;
            g[dof + 1] += s.e[1][0] * bg.x + s.e[1][1] * bg.y;
        }
    }
}

inline Eigen::SparseMatrix<double> assemble_hessian(const DirichletProblem& p,
                                                    const FieldP1& u, const DofMap& dofs,
                                                    double floor) {
    const TriMesh& m = *p.mesh;
    auto gu = gradient(u);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.triangle_count() * 36);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        const Tensor4 h = p.integrand.d2f_floored(gu[t], floor);
        for (int k = 0; k < 3; ++k) {
            const int dk = dofs.of_vertex[m.triangles[t][k]];
            if (dk < 0) continue;
            const Vec2 bk = m.basis_grad[t][k];
            for (int l = 0; l < 3; ++l) {
                const int dl = dofs.of_vertex[m.triangles[t][l]];
                if (dl < 0) continue;
                const Vec2 bl = m.basis_grad[t][l];
                for (int c = 0; c < 2; ++c)
                    for (int d = 0; d < 2; ++d) {
                        const double v =
                            m.area[t] *
                            (h.t[c][0][d][0] * bk.x * bl.x + h.t[c][0][d][1] * bk.x * bl.y +
                             h.t[c][1][d][0] * bk.y * bl.x + h.t[c][1][d][1] * bk.y * bl.y);
                        trip.emplace_back(dk + c, dl + d, v);
                    }
            }
        }
    }
    Eigen::SparseMatrix<double> H(dofs.count, dofs.count);
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
}

inline void add_direction(FieldP1& u, const Eigen::VectorXd& d, const DofMap& dofs,
                          double alpha) {
    for (std::size_t v = 0; v < u.values.size(); ++v) {
        const int dof = dofs.of_vertex[v];
        if (dof < 0) continue;
        u.values[v].x += alpha * d[dof];
        u.values[v].y += alpha * d[dof + 1];
    }
}

} // namespace detail

/// Empirical strict-quasiconvexity constant: the smallest sampled value of
/// int_B (f(Q + grad w) - f(Q)) dx over int_B phi_{|Q|}(|grad w|) dx across
/// seeded zero-boundary fields and scales spanning the degenerate and the
/// growth regimes.  The hypothesis itself quantifies over all of C^1_0, so
/// this is a measured lower-bound report, not a certificate.
inline double measure_quasiconvexity_k(const Integrand& f,
                                       std::shared_ptr<const TriMesh> mesh,
                                       const Mat22& q, std::uint64_t seed = 31337,
                                       int fields = 8) {
    auto phi_a = shift(f.phi, q.norm());
    SplitMix64 rng(seed);
    double kmin = std::numeric_limits<double>::infinity();
    const TriMesh& m = *mesh;
    for (int rep = 0; rep < fields; ++rep) {
        FieldP1 w(mesh);
        for (std::size_t v = 0; v < m.vertex_count(); ++v)
            if (!m.is_boundary[v]) w.values[v] = {rng.normal(), rng.normal()};
        auto gw = gradient(w);
        for (double scale : {1e-2, 1e-1, 1.0, 1e1, 1e2}) {
            double num = 0.0, den = 0.0;
            for (std::size_t t = 0; t < m.triangle_count(); ++t) {
                num += m.area[t] * (f.f(q + gw[t] * scale) - f.f(q));
                den += m.area[t] * phi_a.value(scale * gw[t].norm());
            }
            if (den > 0.0) kmin = std::min(kmin, num / den);
        }
    }
    return kmin;
}

/// Damped Newton descent on the interior nodal values: the assembled second
/// variation drives the direction, with a gradient-descent fallback whenever
/// the Newton step is unavailable or not a descent direction; Armijo
/// backtracking line search; terminates on the max nodal dual residual.
inline MinimizeResult minimize(const DirichletProblem& p, const SolverConfig& cfg = {}) {
    MinimizeResult res;
    res.u = p.data;
    const detail::DofMap dofs(*p.mesh);
    if (dofs.count == 0) {
        res.converged = true;
        res.message = "no interior degrees of freedom";
        return res;
    }
    Eigen::VectorXd g(dofs.count);
    double e0 = energy(p, res.u);
    for (int it = 0; it < cfg.max_iters; ++it) {
        detail::assemble_gradient(p, res.u, dofs, g);
        res.residual = g.cwiseAbs().maxCoeff();
        res.iterations = it;
        if (res.residual <= cfg.residual_tol) {
            res.converged = true;
            return res;
        }

        Eigen::VectorXd d;
        bool newton_ok = false;
        {
            auto H = detail::assemble_hessian(p, res.u, dofs, cfg.newton_floor);
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(H);
            if (solver.info() == Eigen::Success) {
                d = solver.solve(-g);
                newton_ok = solver.info() == Eigen::Success && d.dot(g) < 0.0 &&
                            d.allFinite();
            }
        }
        if (!newton_ok) d = -g;

        const double slope = g.dot(d);
        double alpha = 1.0;
        bool stepped = false;
        for (int ls = 0; ls < 60; ++ls) {
            FieldP1 trial = res.u;
            detail::add_direction(trial, d, dofs, alpha);
            const double e1 = energy(p, trial);
            if (e1 <= e0 + cfg.armijo_c * alpha * slope) {
                res.u = trial;
                e0 = e1;
                stepped = true;
                break;
            }
            alpha *= cfg.backtrack;
        }
        if (!stepped) {
            res.converged = false;
            res.message = "line search could not decrease the energy at machine "
                          "precision (residual " + std::to_string(res.residual) + ")";
            return res;
        }
    }
    res.converged = res.residual <= cfg.residual_tol;
    if (!res.converged) res.message = "iteration budget exhausted";
    return res;
}

} // namespace orlicz
