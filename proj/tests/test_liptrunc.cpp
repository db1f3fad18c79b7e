#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "orlicz/liptrunc.hpp"
#include "orlicz/rng.hpp"

using namespace orlicz;
using Catch::Approx;

TEST_CASE("maximal function basics") {
    auto m = build_mesh(1.0, 1.0 / 16.0);

    std::vector<double> c(m->triangle_count(), 2.5);
    auto mc = maximal_function(c, *m);
    for (double v : mc) CHECK(v == Approx(2.5));

    std::vector<double> neg(m->triangle_count(), -1.0);
    CHECK_THROWS_AS(maximal_function(neg, *m), FieldError);

    // monotonicity
    SplitMix64 rng(71);
    std::vector<double> g1(m->triangle_count()), g2(m->triangle_count());
    for (std::size_t t = 0; t < m->triangle_count(); ++t) {
        g1[t] = rng.uniform01();
        g2[t] = g1[t] + rng.uniform01();
    }
    auto m1 = maximal_function(g1, *m);
    auto m2 = maximal_function(g2, *m);
    for (std::size_t v = 0; v < m->vertex_count(); ++v) CHECK(m1[v] <= m2[v] + 1e-14);
}

TEST_CASE("maximal function of a single-triangle indicator decays with distance") {
    auto m = build_mesh(1.0, 1.0 / 16.0);
    // triangle nearest the center
    std::size_t tc = 0;
    double bd = 1e300;
    for (std::size_t t = 0; t < m->triangle_count(); ++t) {
        const double d = m->centroid[t].norm2();
        if (d < bd) {
            bd = d;
            tc = t;
        }
    }
    std::vector<double> g(m->triangle_count(), 0.0);
    g[tc] = 1.0;
    auto mg = maximal_function(g, *m);

    auto value_at = [&](Vec2 p) {
        std::size_t best = 0;
        double d = 1e300;
        for (std::size_t v = 0; v < m->vertex_count(); ++v)
            if ((m->vertices[v] - p).norm2() < d) {
                d = (m->vertices[v] - p).norm2();
                best = v;
            }
        return mg[best];
    };
    const double v1 = value_at({0.25, 0.0});
    const double v2 = value_at({0.5, 0.0});
    const double v3 = value_at({0.9, 0.9});
    CHECK(v1 > v2);
    CHECK(v2 > v3);
    // any covering ball average is at least integral / domain area
    for (double v : mg) CHECK(v >= m->area[tc] / 4.0 - 1e-15);
}

TEST_CASE("level selection") {
    auto m = build_mesh(1.0, 1.0 / 16.0);
    auto psi = make_power(2.0);

    // Lipschitz input: gradient bounded by gamma, empty bad set at j = 0
    auto lip = interpolate(m, [](Vec2 p) {
        const double b = (1.0 - std::abs(p.x)) * (1.0 - std::abs(p.y));
        return Vec2{0.1 * b, 0.0};
    });
    auto choice = select_level(lip, psi, 1.0, 8);
    CHECK(choice.index == 0);
    CHECK(choice.lambda == 1.0);
    CHECK(choice.product == 0.0);

    // spike: the pigeonhole winner is no worse than the ladder average
    auto w = make_spike_field(m, {{{0.0, 0.0}, 1.0}});
    auto ch = select_level(w, psi, 1.0, 8);
    double mean = 0.0;
    for (double p : ch.products) mean += p;
    mean /= static_cast<double>(ch.products.size());
    CHECK(ch.product <= mean + 1e-15);
    CHECK(ch.lambda >= 1.0);
    CHECK(ch.lambda <= std::ldexp(1.0, 8));

    // doubling gamma moves the product by at most the Delta_2 factor
    auto ch2 = select_level(w, psi, 2.0, 8);
    const double delta2 = characteristics_estimate(psi, 64).delta2_phi;
    CHECK(ch2.product <= delta2 * ch.product * (1.0 + 1e-12));

    CHECK_THROWS_AS(select_level(w, psi, 0.0, 8), FieldError);
    CHECK_THROWS_AS(select_level(w, psi, 1.0, 0), FieldError);
}

TEST_CASE("truncation passes Lipschitz inputs through exactly") {
    auto m = build_mesh(1.0, 1.0 / 16.0);
    auto psi = make_power(2.0);
    auto lip = interpolate(m, [](Vec2 p) {
        const double b = (1.0 - std::abs(p.x)) * (1.0 - std::abs(p.y));
        return Vec2{0.3 * b, -0.2 * b};
    });
    double gmax = 0.0;
    for (double v : magnitudes(gradient(lip))) gmax = std::max(gmax, v);
    auto res = truncate(lip, psi, gmax, 8);
    CHECK(res.bad_triangles.empty());
    CHECK(res.lambda == gmax);
    CHECK(res.lip_const <= 1.0);
    for (std::size_t v = 0; v < m->vertex_count(); ++v) {
        CHECK(res.w_lambda.values[v].x == lip.values[v].x);
        CHECK(res.w_lambda.values[v].y == lip.values[v].y);
    }
    auto est = verify_truncation(lip, res, psi);
    CHECK(est.e2 == 0.0);
    CHECK(est.e3 == 1.0);
}

TEST_CASE("truncation of a spike") {
    auto m = build_mesh(1.0, 1.0 / 32.0);
    auto psi = make_power(2.0);
    auto w = make_spike_field(m, {{{0.0, 0.0}, 1.0}});
    // budget 4 keeps every ladder level nonempty, forcing a genuine cut
    auto res = truncate(w, psi, 1.0, 4);

    CHECK(!res.bad_triangles.empty());
    CHECK(res.lambda >= 1.0);
    CHECK(res.lambda <= 16.0);

    // bad set localized around the spike
    for (int t : res.bad_triangles)
        CHECK(m->centroid[static_cast<std::size_t>(t)].norm() < 0.5);

    // theorem estimates
    auto est = verify_truncation(w, res, psi);
    CHECK(est.e1 <= 8.0);
    CHECK(std::isfinite(est.e2));
    CHECK(est.e3 <= 10.0);

    // with a budget reaching past max M(|grad w|) the minimizing level has an
    // empty bad set: the field is already Lipschitz at that lambda
    auto noop = truncate(w, psi, 1.0, 8);
    CHECK(noop.bad_triangles.empty());
    CHECK(noop.lip_const <= 8.0);
    for (std::size_t v = 0; v < m->vertex_count(); ++v)
        CHECK(noop.w_lambda.values[v].x == w.values[v].x);

    // nodal agreement away from bad triangles
    std::vector<char> touched(m->vertex_count(), 0);
    for (int t : res.bad_triangles)
        for (int k = 0; k < 3; ++k)
            touched[m->triangles[static_cast<std::size_t>(t)][k]] = 1;
    for (std::size_t v = 0; v < m->vertex_count(); ++v)
        if (!touched[v]) {
            CHECK(res.w_lambda.values[v].x == w.values[v].x);
            CHECK(res.w_lambda.values[v].y == w.values[v].y);
        }

    // boundary zeros inherited
    for (int v : m->boundary_nodes) CHECK(res.w_lambda.values[v].norm() == 0.0);

    // the spike is gone
    std::size_t center = 0;
    double bd = 1e300;
    for (std::size_t v = 0; v < m->vertex_count(); ++v)
        if (m->vertices[v].norm2() < bd) {
            bd = m->vertices[v].norm2();
            center = v;
        }
    CHECK(res.w_lambda.values[center].norm() < w.values[center].norm());
}

TEST_CASE("re-truncation at the output's own level is exact") {
    auto m = build_mesh(1.0, 1.0 / 32.0);
    for (auto psi : {make_power(1.5), make_power(2.0), make_power(3.0)}) {
        auto w = make_spike_field(m, {{{0.1, -0.2}, 1.0}, {{-0.4, 0.3}, 0.5}});
        auto res = truncate(w, psi, 1.0, 4);
        double sup = 0.0;
        for (double v : magnitudes(gradient(res.w_lambda))) sup = std::max(sup, v);
        auto again = truncate(res.w_lambda, psi, std::max(sup, 1e-12), 8);
        CHECK(again.bad_triangles.empty());
        for (std::size_t v = 0; v < m->vertex_count(); ++v) {
            CHECK(again.w_lambda.values[v].x == res.w_lambda.values[v].x);
            CHECK(again.w_lambda.values[v].y == res.w_lambda.values[v].y);
        }
    }
}

TEST_CASE("truncation estimates are uniform over the budget m0") {
    auto m = build_mesh(1.0, 1.0 / 32.0);
    auto psi = make_power(2.0);
    auto w = make_spike_field(m, {{{0.0, 0.0}, 1.0}});
    double worst = 0.0;
    for (int m0 : {4, 8, 16}) {
        auto res = truncate(w, psi, 1.0, m0);
        auto est = verify_truncation(w, res, psi);
        CHECK(est.e1 <= 8.0);
        worst = std::max(worst, est.e2);
    }
    CHECK(std::isfinite(worst));
    CHECK(worst < 50.0);
}

TEST_CASE("truncation rejects nonzero boundary data") {
    auto m = build_mesh(1.0, 0.25);
    auto psi = make_power(2.0);
    FieldP1 w(m);
    w.values[m->boundary_nodes.front()] = {1.0, 0.0};
    CHECK_THROWS_AS(truncate(w, psi, 1.0, 4), FieldError);
}
