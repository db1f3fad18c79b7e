#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "orlicz/field.hpp"
#include "orlicz/integrand.hpp"
#include "orlicz/mesh.hpp"
#include "orlicz/minimize.hpp"

namespace orlicz {

/// Constant bilinear form on gradients, strongly elliptic in the sense of
/// Legendre-Hadamard; kappa is the measured rank-one lower bound.
struct EllipticTensor {
    Tensor4 a;
    double kappa = 0.0;
    double norm = 0.0;

    static EllipticTensor identity() {
        EllipticTensor t;
        t.a = Tensor4::identity();
        t.kappa = 1.0;
        t.norm = 2.0;
        return t;
    }

    EllipticTensor transposed() const {
        EllipticTensor t = *this;
        t.a = a.transposed();
        return t;
    }
};

/// Smallest value of A(eta otimes xi, eta otimes xi) over unit vectors, by an
/// exhaustive 360x360 angle grid refined with three local grid passes.  The
/// rank-one manifold in 2x2 is tiny, so the search is certifiable.
inline double measure_kappa(const Tensor4& a) {
    auto form = [&a](double alpha, double beta) {
        const Vec2 eta{std::cos(alpha), std::sin(alpha)};
        const Vec2 xi{std::cos(beta), std::sin(beta)};
        const Mat22 r = Mat22::outer(eta, xi);
        return a.bilinear(r, r);
    };
    double best = 1e300, ba = 0.0, bb = 0.0;
    const int n = 360;
    const double step0 = 2.0 * M_PI / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = form(i * step0, j * step0);
            if (v < best) {
                best = v;
                ba = i * step0;
                bb = j * step0;
            }
        }
    double step = step0;
    for (int round = 0; round < 3; ++round) {
        const double lo_a = ba - step, lo_b = bb - step;
        const double fine = 2.0 * step / 40.0;
        for (int i = 0; i <= 40; ++i)
            for (int j = 0; j <= 40; ++j) {
                const double v = form(lo_a + i * fine, lo_b + j * fine);
                if (v < best) {
                    best = v;
                    ba = lo_a + i * fine;
                    bb = lo_b + j * fine;
                }
            }
        step = fine;
    }
    return best;
}

/// A = D^2 f(Q) / phi''(|Q|); undefined at Q = 0.
inline EllipticTensor tensor_from_integrand(const Integrand& f, const Mat22& q) {
    const double n = q.norm();
    if (n == 0.0)
        throw IntegrandError("the normalized second-variation tensor is undefined at Q = 0");
    EllipticTensor t;
    t.a = f.d2f(q) * (1.0 / f.phi.raw_second(n));
    t.norm = t.a.norm();
    t.kappa = measure_kappa(t.a);
    if (!(t.kappa > 0.0))
        throw IntegrandError("tensor is not Legendre-Hadamard elliptic (kappa = " +
                             std::to_string(t.kappa) + ")");
    return t;
}

/// Discrete solution operator T_A: weak solution of -div(A grad w) = -div G
/// with w = 0 on the boundary nodes.  The assembled system is solved directly;
/// the residual is verified to 1e-10 relative.
inline FieldP1 solve_dirichlet_div(const EllipticTensor& A,
                                   const std::vector<Mat22>& g_tri,
                                   std::shared_ptr<const TriMesh> mesh) {
    const TriMesh& m = *mesh;
    const detail::DofMap dofs(m);
    FieldP1 w(mesh);
    if (dofs.count == 0) return w;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m.triangle_count() * 36);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dofs.count);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const int dk = dofs.of_vertex[m.triangles[t][k]];
            if (dk < 0) continue;
            const Vec2 bk = m.basis_grad[t][k];
            for (int c = 0; c < 2; ++c)
                rhs[dk + c] += m.area[t] * (g_tri[t].e[c][0] * bk.x + g_tri[t].e[c][1] * bk.y);
            for (int l = 0; l < 3; ++l) {
                const int dl = dofs.of_vertex[m.triangles[t][l]];
                if (dl < 0) continue;
                const Vec2 bl = m.basis_grad[t][l];
                for (int c = 0; c < 2; ++c)
                    for (int d = 0; d < 2; ++d) {
                        const double v =
                            m.area[t] * (A.a.t[c][0][d][0] * bk.x * bl.x +
                                         A.a.t[c][0][d][1] * bk.x * bl.y +
                                         A.a.t[c][1][d][0] * bk.y * bl.x +
                                         A.a.t[c][1][d][1] * bk.y * bl.y);
                        trip.emplace_back(dk + c, dl + d, v);
                    }
            }
        }
    }
    Eigen::SparseMatrix<double> K(dofs.count, dofs.count);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(K);
    if (solver.info() != Eigen::Success)
        throw SolverError("assembled elliptic system is singular (mesh or tensor "
                          "pathology)");
    Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !x.allFinite())
        throw SolverError("direct solve of the elliptic system failed");
    const double rn = (K * x - rhs).norm();
    if (rn > 1e-10 * std::max(1.0, rhs.norm()))
        throw SolverError("elliptic solve residual too large: " + std::to_string(rn));
    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        const int dof = dofs.of_vertex[v];
        if (dof >= 0) w.values[v] = {x[dof], x[dof + 1]};
    }
    return w;
}

/// A-harmonic function with the boundary values of g, on g's own mesh:
/// h = g - T_A(A grad g).
inline FieldP1 aharmonic_extension(const EllipticTensor& A, const FieldP1& g) {
    auto grads = gradient(g);
    std::vector<Mat22> ag(grads.size());
    for (std::size_t t = 0; t < grads.size(); ++t) ag[t] = A.a.apply(grads[t]);
    FieldP1 w = solve_dirichlet_div(A, ag, g.mesh);
    return g - w;
}

struct HarmonicApproximation {
    SubMesh sub;   // polygonal approximation of the ball
    FieldP1 u;     // input restricted to the sub-mesh
    FieldP1 h;     // A-harmonic, h = u on the sub-mesh boundary
    FieldP1 w;     // u - h, zero boundary
};

/// Solves the approximation problem on the sub-mesh of B: h agrees with u on
/// the sub-mesh boundary and is discretely A-harmonic inside.
inline HarmonicApproximation harmonic_approximation(const EllipticTensor& A,
                                                    const FieldP1& u, const Ball& ball) {
    HarmonicApproximation out;
    out.sub = restrict_to_ball(u.mesh, ball);
    if (out.sub.interior_vertex_count() < 25)
        throw MeshError("sub-mesh of the ball has fewer than 25 interior vertices; "
                        "refine the mesh or enlarge the ball");
    out.u = FieldP1(out.sub.mesh);
    for (std::size_t v = 0; v < out.sub.mesh->vertex_count(); ++v)
        out.u.values[v] = u.values[out.sub.vertex_of_parent[v]];
    out.h = aharmonic_extension(A, out.u);
    out.w = out.u - out.h;
    return out;
}

/// Interior decay ratio sup_{tau B} |grad h - <grad h>_{tau B}| divided by
/// tau * avg_B |grad h - <grad h>_B|; 0 when both sides vanish.
inline double interior_decay_probe(const FieldP1& h, const Ball& ball, double tau) {
    if (!(tau > 0.0) || tau > 0.5)
        throw MeshError("decay probe expects tau in (0, 1/2]");
    const TriMesh& m = *h.mesh;
    auto g = gradient(h);
    const Ball inner = ball.scaled(tau);

    const Mat22 mean_inner = ball_average(m, g, inner);
    double sup = 0.0;
    for (std::size_t t = 0; t < m.triangle_count(); ++t)
        if (inner.contains(m.centroid[t]))
            sup = std::max(sup, (g[t] - mean_inner).norm());

    const Mat22 mean_outer = ball_average(m, g, ball);
    double dev = 0.0, den = 0.0, gscale = 0.0;
    clipped_quadrature(m, ball, [&](std::size_t t, Vec2, double wq) {
        dev += wq * (g[t] - mean_outer).norm();
        den += wq;
        gscale = std::max(gscale, g[t].norm());
    });
    const double davg = den > 0.0 ? dev / den : 0.0;
    // oscillation at rounding level counts as zero (0/0 convention)
    if (davg <= 1e-12 * gscale) return 0.0;
    return sup / (tau * davg);
}

struct VariationalCheck {
    double lhs = 0.0; // ||grad u||_psi
    double rhs = 0.0; // best normalized pairing over the test family
};

/// Duality check of ||grad u||_psi against sup over ||grad xi||_{psi*} <= 1 of
/// int A grad u : grad xi, over the nodal basis family plus the
/// duality-optimal field projected to a zero-boundary nodal field.
inline VariationalCheck variational_norm_check(const EllipticTensor& A, const FieldP1& u,
                                               const NFunction& psi) {
    const TriMesh& m = *u.mesh;
    for (int v : m.boundary_nodes)
        if (u.values[v].norm2() > 0.0)
            throw SolverError("variational check expects zero boundary values");
    VariationalCheck out;
    auto gu = gradient(u);
    out.lhs = luxemburg_norm(psi, m, magnitudes(gu));
    if (out.lhs == 0.0) return out;

    auto psi_conj = conjugate(psi);
    std::vector<Mat22> agu(gu.size());
    for (std::size_t t = 0; t < gu.size(); ++t) agu[t] = A.a.apply(gu[t]);

    // stars of interior vertices
    std::vector<std::vector<int>> star(m.vertex_count());
    for (std::size_t t = 0; t < m.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k) star[m.triangles[t][k]].push_back(static_cast<int>(t));

    auto local_index = [&](int t, int v) {
        for (int k = 0; k < 3; ++k)
            if (m.triangles[t][k] == v) return k;
        return -1;
    };

    for (std::size_t v = 0; v < m.vertex_count(); ++v) {
        if (m.is_boundary[v] || star[v].empty()) continue;
        // psi*-Luxemburg norm of the hat gradient (shared by both components)
        const double nrm = detail::luxemburg_bisect(
            [&](double lam) {
                double s = 0.0;
                for (int t : star[v]) {
                    const Vec2 bg = m.basis_grad[t][local_index(t, static_cast<int>(v))];
                    s += m.area[t] * psi_conj.value(bg.norm() / lam);
                }
                return s;
            },
            1.0);
        if (!(nrm > 0.0)) continue;
        for (int c = 0; c < 2; ++c) {
            double pairing = 0.0;
            for (int t : star[v]) {
                const Vec2 bg = m.basis_grad[t][local_index(t, static_cast<int>(v))];
                pairing += m.area[t] * (agu[t].e[c][0] * bg.x + agu[t].e[c][1] * bg.y);
            }
            out.rhs = std::max(out.rhs, std::abs(pairing) / nrm);
        }
    }

    // duality-optimal direction psi'(|grad u|) grad u / |grad u|, projected
    std::vector<Mat22> hopt(gu.size());
    for (std::size_t t = 0; t < gu.size(); ++t) {
        const double n = gu[t].norm();
        if (n > 0.0) hopt[t] = gu[t] * (psi.deriv(n) / n);
    }
    FieldP1 xi = solve_dirichlet_div(EllipticTensor::identity(), hopt, u.mesh);
    auto gxi = gradient(xi);
    const double nrm = luxemburg_norm(psi_conj, m, magnitudes(gxi));
    if (nrm > 0.0) {
        double pairing = 0.0;
        for (std::size_t t = 0; t < gu.size(); ++t)
            pairing += m.area[t] * agu[t].dot(gxi[t]);
        out.rhs = std::max(out.rhs, std::abs(pairing) / nrm);
    }
    return out;
}

} // namespace orlicz
