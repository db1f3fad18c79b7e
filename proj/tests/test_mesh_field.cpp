#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "orlicz/field.hpp"
#include "orlicz/mesh.hpp"
#include "orlicz/rng.hpp"

using namespace orlicz;
using Catch::Approx;

namespace {

// plain t^2 (not t^2/2), handy for the L^2 sanity cases
NFunction plain_square() {
    NFunction f;
    f.name = "t^2";
    f.raw_value = [](double t) { return t * t; };
    f.raw_deriv = [](double t) { return 2.0 * t; };
    f.raw_second = [](double) { return 2.0; };
    return f;
}

} // namespace

TEST_CASE("structured mesh counts and geometry") {
    auto m = build_mesh(1.0, 1.0);
    CHECK(m->vertex_count() == 9);
    CHECK(m->triangle_count() == 8);
    CHECK(m->total_area() == Approx(4.0).epsilon(1e-13));

    auto m2 = build_mesh(1.0, 0.5);
    CHECK(m2->vertex_count() == 25);
    CHECK(m2->total_area() == Approx(4.0).epsilon(1e-13));

    for (int v : m2->boundary_nodes) {
        const Vec2 p = m2->vertices[v];
        CHECK((std::abs(std::abs(p.x) - 1.0) < 1e-14 ||
               std::abs(std::abs(p.y) - 1.0) < 1e-14));
    }

    CHECK_THROWS_AS(build_mesh(1.0, 2.0), MeshError);
    CHECK_THROWS_AS(build_mesh(1.0, 1e-4), MeshError); // > 10^7 vertices
}

TEST_CASE("P1 gradient reproduces affine fields exactly") {
    auto m = build_mesh(1.0, 0.25);
    AffineField q{Mat22::identity(), {0.3, -0.7}};
    auto g = gradient(interpolate(m, q));
    for (const auto& gt : g) CHECK((gt - Mat22::identity()).norm() < 1e-14);

    FieldP1 c(m);
    for (auto& v : c.values) v = {2.0, -1.0};
    for (const auto& gt : gradient(c)) CHECK(gt.norm() < 1e-14);
}

TEST_CASE("P1 gradient of x^2 takes the mid-extent slope per triangle") {
    auto m = build_mesh(1.0, 0.25);
    auto u = interpolate(m, [](Vec2 p) { return Vec2{p.x * p.x, 0.0}; });
    auto g = gradient(u);
    for (std::size_t t = 0; t < m->triangle_count(); ++t) {
        double xmin = 1e9, xmax = -1e9;
        for (int k = 0; k < 3; ++k) {
            xmin = std::min(xmin, m->vertices[m->triangles[t][k]].x);
            xmax = std::max(xmax, m->vertices[m->triangles[t][k]].x);
        }
        CHECK(g[t].e[0][0] == Approx(xmin + xmax).margin(1e-13));
        CHECK(std::abs(g[t].e[0][1]) < 1e-13);
        CHECK(std::abs(g[t].e[1][0]) < 1e-13);
        CHECK(std::abs(g[t].e[1][1]) < 1e-13);
    }
}

TEST_CASE("clipped ball geometry is about 1e-3 accurate") {
    auto m = build_mesh(1.0, 1.0 / 32.0);
    const Ball b{{0.1, -0.2}, 0.7};
    CHECK(clipped_area(*m, b) == Approx(M_PI * 0.49).epsilon(2e-3));
}

TEST_CASE("ball averages") {
    auto m = build_mesh(1.0, 1.0 / 32.0);
    const Ball b{{0.0, 0.0}, 1.0};

    std::vector<double> ones(m->triangle_count(), 3.5);
    CHECK(ball_average(*m, ones, b) == Approx(3.5));

    auto ux = interpolate(m, [](Vec2 p) { return Vec2{p.x, 0.0}; });
    CHECK(ball_average(ux, b).x == Approx(0.0).margin(2e-3));

    auto ux2 = interpolate(m, [](Vec2 p) { return Vec2{p.x * p.x, 0.0}; });
    CHECK(ball_average(ux2, b).x == Approx(0.25).margin(1e-2));

    // affine field with zero offset averages to zero at its center
    auto ua = interpolate(m, AffineField{Mat22{{{0.4, -1.0}, {2.0, 0.3}}}, {0, 0}});
    const Vec2 avg = ball_average(ua, Ball{{0, 0}, 0.5});
    CHECK(std::abs(avg.x) < 2e-3);
    CHECK(std::abs(avg.y) < 2e-3);

    CHECK_THROWS_AS(ball_average(*m, ones, Ball{{50.0, 0.0}, 0.1}), MeshError);
}

TEST_CASE("modulars") {
    auto m = build_mesh(1.0, 1.0 / 16.0);
    auto sq = plain_square();

    std::vector<double> zero(m->triangle_count(), 0.0);
    CHECK(modular(sq, *m, zero) == 0.0);

    std::vector<double> cdata(m->triangle_count(), 1.7);
    CHECK(modular(sq, *m, cdata) == Approx(1.7 * 1.7 * 4.0).epsilon(1e-12));

    // psi = t^3/3, g = |x| on [-1,1]^2: integral of |x|^3/3 equals 1/3
    auto p3 = make_power(3.0);
    const double v =
        modular_fn(p3, *m, [&](std::size_t, Vec2 p) { return std::abs(p.x); });
    CHECK(v == Approx(1.0 / 3.0).epsilon(1e-3));

    // monotone in |g|
    std::vector<double> small(m->triangle_count()), big(m->triangle_count());
    SplitMix64 rng(31);
    for (std::size_t t = 0; t < m->triangle_count(); ++t) {
        small[t] = rng.uniform01();
        big[t] = small[t] + rng.uniform01();
    }
    CHECK(modular(p3, *m, small) <= modular(p3, *m, big));

    // convex along linear interpolation of two fields
    const double m0 = modular(p3, *m, small);
    const double m1 = modular(p3, *m, big);
    std::vector<double> mid(m->triangle_count());
    for (std::size_t t = 0; t < m->triangle_count(); ++t)
        mid[t] = 0.5 * (small[t] + big[t]);
    CHECK(modular(p3, *m, mid) <= 0.5 * (m0 + m1) + 1e-12 * (m0 + m1));
}

TEST_CASE("luxemburg norm") {
    // area-1 domain, constant |g| = c, psi = t^2: norm is c
    auto unit = build_mesh(0.5, 1.0 / 16.0);
    auto sq = plain_square();
    std::vector<double> cdata(unit->triangle_count(), 2.31);
    CHECK(luxemburg_norm(sq, *unit, cdata) == Approx(2.31).epsilon(1e-9));

    std::vector<double> zero(unit->triangle_count(), 0.0);
    CHECK(luxemburg_norm(sq, *unit, zero) == 0.0);

    // area-3 domain, g = 1, psi = t^3/3: modular(1/lambda) = 3 (1/lambda)^3 / 3
    auto three = build_mesh(std::sqrt(3.0) / 2.0, 0.05);
    REQUIRE(three->total_area() == Approx(3.0).epsilon(1e-12));
    std::vector<double> one(three->triangle_count(), 1.0);
    CHECK(luxemburg_norm(make_power(3.0), *three, one) == Approx(1.0).epsilon(1e-9));

    // homogeneity
    SplitMix64 rng(37);
    std::vector<double> g(unit->triangle_count());
    for (auto& x : g) x = rng.uniform(0.0, 5.0);
    const double n1 = luxemburg_norm(make_power(3.0), *unit, g);
    auto g2 = g;
    for (auto& x : g2) x *= 3.7;
    CHECK(luxemburg_norm(make_power(3.0), *unit, g2) == Approx(3.7 * n1).epsilon(1e-8));
}

TEST_CASE("submesh restriction") {
    auto m = build_mesh(1.0, 1.0 / 16.0);
    const Ball b{{0.1, 0.1}, 0.5};
    auto sub = restrict_to_ball(m, b);
    CHECK(sub.mesh->triangle_count() > 0);
    CHECK(sub.interior_vertex_count() > 25);
    for (std::size_t t = 0; t < sub.mesh->triangle_count(); ++t)
        CHECK(b.contains(sub.mesh->centroid[t]));
    // parent maps are consistent
    for (std::size_t t = 0; t < sub.mesh->triangle_count(); ++t) {
        const auto& pt = m->triangles[sub.tri_of_parent[t]];
        const auto& st = sub.mesh->triangles[t];
        for (int k = 0; k < 3; ++k) CHECK(sub.vertex_of_parent[st[k]] == pt[k]);
    }
    CHECK_THROWS_AS(restrict_to_ball(m, Ball{{0, 0}, 1e-4}), MeshError);
}

TEST_CASE("field CSV round trip and edge export") {
    auto m = build_mesh(1.0, 0.5);
    SplitMix64 rng(41);
    FieldP1 u(m);
    for (auto& v : u.values) v = {rng.normal(), rng.normal()};
    const std::string path = "field_roundtrip_test.csv";
    export_field_csv(u, path);
    auto back = import_field_csv(m, path);
    for (std::size_t v = 0; v < u.values.size(); ++v) {
        CHECK(back.values[v].x == u.values[v].x);
        CHECK(back.values[v].y == u.values[v].y);
    }
    std::remove(path.c_str());

    auto tiny = build_mesh(1.0, 1.0);
    const std::string epath = "mesh_edges_test.csv";
    export_mesh_edges_csv(*tiny, epath);
    std::ifstream in(epath);
    int lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 1 + 16); // header + E = V + T - 1 = 9 + 8 - 1
    std::remove(epath.c_str());
}
