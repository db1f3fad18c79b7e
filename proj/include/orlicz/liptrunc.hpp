#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "orlicz/field.hpp"
#include "orlicz/mesh.hpp"
#include "orlicz/minimize.hpp"
#include "orlicz/parallel.hpp"

namespace orlicz {

/// Discrete Hardy-Littlewood maximal function over the dyadic radius ladder
/// {h, 2h, 4h, ...} up to the domain diameter.  Ball membership is by triangle
/// centroid, area-weighted; input must be non-negative per-triangle data.
inline std::vector<double> maximal_function(const std::vector<double>& g,
                                            const TriMesh& mesh) {
    for (double v : g)
        if (v < 0.0) throw FieldError("maximal_function expects non-negative data");
    const std::size_t nv = mesh.vertex_count();
    const std::size_t nt = mesh.triangle_count();
    double diam2 = 0.0;
    for (const auto& c : mesh.centroid)
        for (const auto& c2 : {mesh.vertices.front(), mesh.vertices.back()})
            diam2 = std::max(diam2, (c - c2).norm2());
    const int nrad = std::max(1, static_cast<int>(
                                      std::ceil(std::log2(std::sqrt(diam2) / mesh.h))) + 1);
    // squared dyadic radii; bin k holds h 2^{k-1} < dist <= h 2^k
    std::vector<double> r2(static_cast<std::size_t>(nrad));
    for (int k = 0; k < nrad; ++k) {
        const double r = std::ldexp(mesh.h, k);
        r2[static_cast<std::size_t>(k)] = r * r;
    }
    std::vector<double> out(nv, 0.0);
    parallel_for(nv, [&](std::size_t v) {
        const Vec2 p = mesh.vertices[v];
        std::vector<double> num(static_cast<std::size_t>(nrad), 0.0);
        std::vector<double> den(static_cast<std::size_t>(nrad), 0.0);
        for (std::size_t t = 0; t < nt; ++t) {
            const double d2 = (mesh.centroid[t] - p).norm2();
            int k = nrad - 1;
            while (k > 0 && d2 <= r2[static_cast<std::size_t>(k - 1)]) --k;
            num[static_cast<std::size_t>(k)] += mesh.area[t] * g[t];
            den[static_cast<std::size_t>(k)] += mesh.area[t];
        }
        double best = 0.0, cn = 0.0, cd = 0.0;
        for (int k = 0; k < nrad; ++k) {
            cn += num[static_cast<std::size_t>(k)];
            cd += den[static_cast<std::size_t>(k)];
            if (cd > 0.0) best = std::max(best, cn / cd);
        }
        out[v] = best;
    });
    return out;
}

struct LevelChoice {
    double lambda = 0.0;
    int index = 0;                 // lambda = 2^index gamma
    double product = 0.0;          // psi(lambda) |bad| / |B| at the winner
    std::vector<double> products;  // per dyadic level
};

namespace detail {

/// Area of the triangles touching a vertex where the maximal function exceeds
/// the level; this is exactly the region the truncation may modify.
inline double bad_area(const TriMesh& mesh, const std::vector<double>& maximal,
                       double level) {
    double area = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k)
            if (maximal[mesh.triangles[t][k]] > level) {
                area += mesh.area[t];
                break;
            }
    return area;
}

} // namespace detail

namespace detail {

inline LevelChoice select_level_from(const std::vector<double>& maximal,
                                     const TriMesh& mesh, const NFunction& psi,
                                     double gamma, int m0) {
    if (!(gamma > 0.0) || m0 < 1)
        throw FieldError("select_level needs gamma > 0 and m0 >= 1");
    const double domain_area = mesh.total_area();
    LevelChoice choice;
    choice.products.resize(static_cast<std::size_t>(m0));
    double best = 1e300;
    for (int j = 0; j < m0; ++j) {
        const double level = std::ldexp(gamma, j);
        const double prod =
            psi.value(level) * detail::bad_area(mesh, maximal, level) / domain_area;
        choice.products[static_cast<std::size_t>(j)] = prod;
        if (prod < best) {
            best = prod;
            choice.index = j;
            choice.lambda = level;
            choice.product = prod;
        }
    }
    return choice;
}

} // namespace detail

/// Evaluates psi(lambda_j) |{M(|grad w|) > lambda_j}| / |B| on the dyadic
/// ladder lambda_j = 2^j gamma, j < m0, and returns the minimizing level (the
/// pigeonhole winner; first index on ties).
inline LevelChoice select_level(const FieldP1& w, const NFunction& psi, double gamma,
                                int m0) {
    if (!(gamma > 0.0) || m0 < 1)
        throw FieldError("select_level needs gamma > 0 and m0 >= 1");
    auto maximal = maximal_function(magnitudes(gradient(w)), *w.mesh);
    return detail::select_level_from(maximal, *w.mesh, psi, gamma, m0);
}

struct TruncationResult {
    FieldP1 w_lambda;
    double lambda = 0.0;
    double gamma = 0.0;
    int m0 = 0;
    std::vector<int> bad_triangles; // where w_lambda may differ from w
    double lip_const = 0.0;         // ||grad w_lambda||_inf / lambda
    int clamp_rounds = 0;
};

/// Median |grad w|, the standalone default for the base level gamma.
inline double default_gamma(const FieldP1& w, int m0 = 8) {
    auto mags = magnitudes(gradient(w));
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    double med = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
    if (med > 0.0) return med;
    const double top = sorted.empty() ? 0.0 : sorted.back();
    if (top > 0.0) return std::ldexp(top, -m0);
    return 1.0;
}

/// Lipschitz truncation of a zero-boundary field: nodal values are kept where
/// the maximal function is at most lambda; the remaining vertices are refilled
/// by a discrete Laplace solve with the kept values as Dirichlet data, then at
/// most five gradient-clamp rounds rescale components whose triangles still
/// exceed 8 lambda.
inline TruncationResult truncate(const FieldP1& w, const NFunction& psi, double gamma,
                                 int m0) {
    const TriMesh& mesh = *w.mesh;
    for (int v : mesh.boundary_nodes)
        if (w.values[v].norm2() > 0.0)
            throw FieldError("truncation expects zero boundary values (node " +
                             std::to_string(v) + ")");
    TruncationResult res;
    res.gamma = gamma;
    res.m0 = m0;
    auto maximal = maximal_function(magnitudes(gradient(w)), mesh);
    auto choice = detail::select_level_from(maximal, mesh, psi, gamma, m0);
    res.lambda = choice.lambda;

    std::vector<char> vertex_bad(mesh.vertex_count(), 0);
    bool any_bad = false;
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
        if (maximal[v] > res.lambda) {
            vertex_bad[v] = 1;
            any_bad = true;
        }
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k)
            if (vertex_bad[mesh.triangles[t][k]]) {
                res.bad_triangles.push_back(static_cast<int>(t));
                break;
            }

    res.w_lambda = w;
    if (!any_bad) {
        res.lip_const = 0.0;
        auto mags = magnitudes(gradient(res.w_lambda));
        for (double mgn : mags) res.lip_const = std::max(res.lip_const, mgn);
        res.lip_const /= res.lambda;
        return res;
    }

    // unknowns: bad interior vertices (boundary stays pinned at zero)
    std::vector<int> dof(mesh.vertex_count(), -1);
    std::vector<int> unknowns;
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
        if (vertex_bad[v] && !mesh.is_boundary[v]) {
            dof[v] = static_cast<int>(unknowns.size());
            unknowns.push_back(static_cast<int>(v));
        }

    if (!unknowns.empty()) {
        const int n = static_cast<int>(unknowns.size());
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd bx = Eigen::VectorXd::Zero(n), by = Eigen::VectorXd::Zero(n);
        for (int t : res.bad_triangles) {
            for (int k = 0; k < 3; ++k) {
                const int vk = mesh.triangles[static_cast<std::size_t>(t)][k];
                if (dof[vk] < 0) continue;
                const Vec2 bk = mesh.basis_grad[static_cast<std::size_t>(t)][k];
                for (int l = 0; l < 3; ++l) {
                    const int vl = mesh.triangles[static_cast<std::size_t>(t)][l];
                    const Vec2 bl = mesh.basis_grad[static_cast<std::size_t>(t)][l];
                    const double kv = mesh.area[static_cast<std::size_t>(t)] * bk.dot(bl);
                    if (dof[vl] >= 0) {
                        trip.emplace_back(dof[vk], dof[vl], kv);
                    } else {
                        bx[dof[vk]] -= kv * w.values[vl].x;
                        by[dof[vk]] -= kv * w.values[vl].y;
                    }
                }
            }
        }
        Eigen::SparseMatrix<double> K(n, n);
        K.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
        if (solver.info() != Eigen::Success)
            throw SolverError("Laplace refill system is singular");
        Eigen::VectorXd x = solver.solve(bx), y = solver.solve(by);
        for (int i = 0; i < n; ++i)
            res.w_lambda.values[static_cast<std::size_t>(unknowns[static_cast<std::size_t>(i)])] = {
                x[i], y[i]};
    }

    // adjacency among refilled vertices, for the clamp's component search
    std::vector<std::vector<int>> adj(unknowns.size());
    for (int t : res.bad_triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.triangles[static_cast<std::size_t>(t)][k];
            const int b = mesh.triangles[static_cast<std::size_t>(t)][(k + 1) % 3];
            if (dof[a] >= 0 && dof[b] >= 0) {
                adj[static_cast<std::size_t>(dof[a])].push_back(dof[b]);
                adj[static_cast<std::size_t>(dof[b])].push_back(dof[a]);
            }
        }

    // gradient clamp: rescale refilled components still above 8 lambda
    const double cap = 8.0 * res.lambda;
    for (int round = 0; round < 5; ++round) {
        auto mags = magnitudes(gradient(res.w_lambda));
        double worst = 0.0;
        int worst_tri = -1;
        for (int t : res.bad_triangles)
            if (mags[static_cast<std::size_t>(t)] > worst) {
                worst = mags[static_cast<std::size_t>(t)];
                worst_tri = t;
            }
        if (worst <= cap) break;
        res.clamp_rounds = round + 1;
        if (round == 4)
            throw SolverError("gradient clamp failed: triangle " +
                              std::to_string(worst_tri) + " keeps |grad| = " +
                              std::to_string(worst) + " > 8 lambda = " +
                              std::to_string(cap));

        // connected components of the refilled vertices (indexed by dof)
        std::vector<int> comp_of_dof(unknowns.size(), -1);
        int ncomp = 0;
        for (std::size_t s = 0; s < unknowns.size(); ++s)
            if (comp_of_dof[s] < 0) {
                std::vector<int> stack{static_cast<int>(s)};
                comp_of_dof[s] = ncomp;
                while (!stack.empty()) {
                    const int cur = stack.back();
                    stack.pop_back();
                    for (int nb : adj[static_cast<std::size_t>(cur)])
                        if (comp_of_dof[static_cast<std::size_t>(nb)] < 0) {
                            comp_of_dof[static_cast<std::size_t>(nb)] = ncomp;
                            stack.push_back(nb);
                        }
                }
                ++ncomp;
            }
        std::vector<int> comp(mesh.vertex_count(), -1);
        for (std::size_t s = 0; s < unknowns.size(); ++s)
            comp[static_cast<std::size_t>(unknowns[s])] = comp_of_dof[s];

        // per component: anchor at the mean of the pinned neighbour values,
        // shrink deviations by the violation factor
        std::vector<double> factor(static_cast<std::size_t>(ncomp), 1.0);
        std::vector<Vec2> anchor(static_cast<std::size_t>(ncomp));
        std::vector<double> anchor_n(static_cast<std::size_t>(ncomp), 0.0);
        for (int t : res.bad_triangles) {
            int c = -1;
            for (int k = 0; k < 3; ++k) {
                const int v = mesh.triangles[static_cast<std::size_t>(t)][k];
                if (dof[v] >= 0) c = comp[static_cast<std::size_t>(v)];
            }
            if (c < 0) continue;
            if (mags[static_cast<std::size_t>(t)] > cap)
                factor[static_cast<std::size_t>(c)] = std::min(
                    factor[static_cast<std::size_t>(c)],
                    0.9 * cap / mags[static_cast<std::size_t>(t)]);
            for (int k = 0; k < 3; ++k) {
                const int v = mesh.triangles[static_cast<std::size_t>(t)][k];
                if (dof[v] < 0) {
                    anchor[static_cast<std::size_t>(c)] += res.w_lambda.values[static_cast<std::size_t>(v)];
                    anchor_n[static_cast<std::size_t>(c)] += 1.0;
                }
            }
        }
        for (int v : unknowns) {
            const int c = comp[static_cast<std::size_t>(v)];
            if (factor[static_cast<std::size_t>(c)] >= 1.0) continue;
            const Vec2 a = anchor_n[static_cast<std::size_t>(c)] > 0.0
                               ? anchor[static_cast<std::size_t>(c)] /
                                     anchor_n[static_cast<std::size_t>(c)]
                               : Vec2{};
            res.w_lambda.values[static_cast<std::size_t>(v)] =
                a + (res.w_lambda.values[static_cast<std::size_t>(v)] - a) *
                        factor[static_cast<std::size_t>(c)];
        }
    }

    double sup = 0.0;
    for (double mgn : magnitudes(gradient(res.w_lambda))) sup = std::max(sup, mgn);
    res.lip_const = sup / res.lambda;
    return res;
}

struct SpikeSpec {
    Vec2 pos;
    double height = 1.0;
};

/// Zero-boundary corpus field: nodal hats at the vertices nearest the given
/// positions.  The second component carries a fraction of the height so the
/// fields are genuinely vector-valued.
inline FieldP1 make_spike_field(std::shared_ptr<const TriMesh> mesh,
                                const std::vector<SpikeSpec>& spikes) {
    FieldP1 w(std::move(mesh));
    for (const auto& s : spikes) {
        std::size_t best = 0;
        double bd = 1e300;
        for (std::size_t v = 0; v < w.mesh->vertex_count(); ++v) {
            if (w.mesh->is_boundary[v]) continue;
            const double d = (w.mesh->vertices[v] - s.pos).norm2();
            if (d < bd) {
                bd = d;
                best = v;
            }
        }
        w.values[best] += Vec2{s.height, 0.3 * s.height};
    }
    return w;
}

struct TruncationEstimates {
    double e1 = 0.0; // ||grad w_lambda||_inf / lambda
    double e2 = 0.0; // m0 * psi(lambda) |bad| / int psi(|grad w|)
    double e3 = 0.0; // modular ratio
};

/// The three theorem estimates, measured.
inline TruncationEstimates verify_truncation(const FieldP1& w,
                                             const TruncationResult& res,
                                             const NFunction& psi) {
    const TriMesh& mesh = *w.mesh;
    TruncationEstimates e;
    e.e1 = res.lip_const;
    double bad = 0.0;
    for (int t : res.bad_triangles) bad += mesh.area[static_cast<std::size_t>(t)];
    const double mod_w = modular(psi, mesh, magnitudes(gradient(w)));
    const double mod_wl = modular(psi, mesh, magnitudes(gradient(res.w_lambda)));
    e.e2 = mod_w > 0.0 ? res.m0 * psi.value(res.lambda) * bad / mod_w : 0.0;
    e.e3 = mod_w > 0.0 ? mod_wl / mod_w : 1.0;
    return e;
}

} // namespace orlicz
