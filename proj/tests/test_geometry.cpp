#include <doctest.h>

#include <cmath>

#include "heatlab/geometry.hpp"
#include "heatlab/presets.hpp"
#include "heatlab/rng.hpp"

using namespace heatlab;

namespace {

// Flat-plane points mapped into the polar chart, the oracle for curved-chart
// geodesics.
Vec cart_to_polar(const Vec& c) { return vec2(std::hypot(c[0], c[1]), std::atan2(c[1], c[0])); }

}  // namespace

TEST_CASE("metric_pack on presets") {
    LaplaceProblem flat = presets::flat(2, 1);
    MetricPack mp = metric_pack(flat, vec2(0.3, -1.0));
    CHECK((mp.g_inv - Mat::Identity(2, 2)).norm() == 0.0);
    CHECK(mp.det_g == doctest::Approx(1.0));
    CHECK(mp.sqrt_g == doctest::Approx(1.0));

    LaplaceProblem polar = presets::polar_flat();
    MetricPack pp = metric_pack(polar, vec2(2.0, 0.0));
    CHECK(pp.g_lower(0, 0) == doctest::Approx(1.0));
    CHECK(pp.g_lower(1, 1) == doctest::Approx(4.0));
    CHECK(pp.det_g == doctest::Approx(4.0));

    CHECK_THROWS_AS(metric_pack(flat, vec2(5.0, 0.0)), OutOfChart);
}

TEST_CASE("metric_pack flags ill-conditioned metrics") {
    LaplaceProblem bad = presets::flat(2, 1);
    bad.metric_inv = [](const Vec&) {
        Mat g(2, 2);
        g << 1.0, 0.0, 0.0, 1e-13;
        return g;
    };
    CHECK_THROWS_AS(metric_pack(bad, vec2(0.0, 0.0)), SingularMetric);
}

TEST_CASE("christoffel symbols") {
    LaplaceProblem flat = presets::flat(2, 1);
    auto G0 = christoffel(flat, vec2(0.7, -0.4));
    for (const auto& g : G0) CHECK(g.cwiseAbs().maxCoeff() < 1e-13);

    // analytic polar values at (r, theta) = (2, 0)
    LaplaceProblem polar = presets::polar_flat();
    auto G = christoffel(polar, vec2(2.0, 0.0));
    CHECK(G[0](1, 1) == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(G[1](0, 1) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(G[0](0, 0)) < 1e-10);
    CHECK(std::abs(G[0](0, 1)) < 1e-10);
    CHECK(std::abs(G[1](0, 0)) < 1e-10);
    CHECK(std::abs(G[1](1, 1)) < 1e-10);

    // symmetry in the lower pair, sampled
    RngStream rng(3, 0);
    for (int i = 0; i < 20; ++i) {
        Vec x = vec2(0.5 + 2.5 * rng.uniform(), -2.0 + 4.0 * rng.uniform());
        auto Gs = christoffel(polar, x);
        for (int lam = 0; lam < 2; ++lam)
            CHECK((Gs[lam] - Gs[lam].transpose()).cwiseAbs().maxCoeff() < 1e-14);
    }

    // stencil guard near the boundary
    CHECK_THROWS_AS(christoffel(polar, vec2(0.2 + 1e-6, 0.0)), OutOfChart);
}

TEST_CASE("geodesic_ivp straight line in the flat chart") {
    LaplaceProblem flat = presets::flat(2, 1);
    Geodesic geo = geodesic_ivp(flat, vec2(0.0, 0.0), vec2(1.0, 0.0));
    CHECK((geo.end - vec2(1.0, 0.0)).norm() < 1e-12);
    for (const auto& k : geo.knots)
        CHECK((k.pos - vec2(k.lambda, 0.0)).norm() < 1e-12);
    CHECK(geo.energy == doctest::Approx(1.0));
}

TEST_CASE("geodesic_ivp polar chart matches the mapped Cartesian line") {
    LaplaceProblem polar = presets::polar_flat();
    GeomOptions gopt;
    // Cartesian line c(t) = (1,0) + t (0.5, 0.8); tangent in polar coordinates
    // at t = 0: dr = 0.5, dtheta = 0.8.
    Geodesic geo = geodesic_ivp(polar, vec2(1.0, 0.0), vec2(0.5, 0.8), gopt);
    double max_err = 0.0;
    for (const auto& k : geo.knots) {
        Vec c = vec2(1.0 + 0.5 * k.lambda, 0.8 * k.lambda);
        max_err = std::max(max_err, (k.pos - cart_to_polar(c)).norm());
    }
    CHECK(max_err < 10.0 * gopt.ode_tol);
}

TEST_CASE("geodesic_ivp leaves the chart") {
    LaplaceProblem flat = presets::flat(2, 1);
    CHECK_THROWS_AS(geodesic_ivp(flat, vec2(0.0, 0.0), vec2(50.0, 0.0)), LeftChart);
}

TEST_CASE("geodesic_bvp flat and polar") {
    LaplaceProblem flat = presets::flat(2, 1);
    Geodesic geo = geodesic_bvp(flat, vec2(0.0, 0.0), vec2(1.0, 1.0));
    CHECK(geo.energy == doctest::Approx(2.0).epsilon(1e-10));

    LaplaceProblem polar = presets::polar_flat();
    Geodesic pg = geodesic_bvp(polar, vec2(1.0, 0.0), vec2(1.0, M_PI / 2));
    CHECK(pg.energy == doctest::Approx(2.0).epsilon(1e-9));  // unit chord squared

    // coincident endpoints degenerate cleanly
    Geodesic dg = geodesic_bvp(flat, vec2(0.3, 0.2), vec2(0.3, 0.2));
    CHECK(dg.energy == 0.0);
    CHECK(dg.v0.norm() == 0.0);
}

TEST_CASE("bvp-ivp round trip and energy conservation") {
    LaplaceProblem polar = presets::polar_flat();
    GeomOptions gopt;
    RngStream rng(11, 0);
    for (int i = 0; i < 8; ++i) {
        Vec y = vec2(0.8 + 1.2 * rng.uniform(), -0.8 + 1.6 * rng.uniform());
        Vec x = vec2(0.8 + 1.2 * rng.uniform(), -0.8 + 1.6 * rng.uniform());
        if ((x - y).norm() < 0.2) continue;
        Geodesic geo = geodesic_bvp(polar, y, x, gopt);
        Geodesic ivp = geodesic_ivp(polar, y, geo.v0, gopt);
        CHECK((ivp.end - x).norm() < gopt.bvp_tol);

        double drift = 0.0;
        for (const auto& k : ivp.knots) {
            Mat g_lower;
            double det;
            invert_spd(polar.metric_inv(k.pos), g_lower, det);
            drift = std::max(drift,
                             std::abs(k.vel.dot(g_lower * k.vel) - ivp.energy) / ivp.energy);
        }
        CHECK(drift < 10.0 * gopt.ode_tol);
    }
}

TEST_CASE("wilson line closed forms") {
    GeomOptions gopt;

    SUBCASE("zero connection gives the identity") {
        LaplaceProblem flat = presets::flat(2, 1);
        Geodesic geo = geodesic_bvp(flat, vec2(0.0, 0.0), vec2(1.0, 0.5));
        CHECK((wilson_line(flat, geo) - CMat::Identity(1, 1)).norm() == 0.0);
    }

    SUBCASE("constant Abelian connection") {
        Vec xi = vec2(0.4, -0.3);
        LaplaceProblem p = presets::constant_abelian(xi, 0.0);
        Vec y = vec2(-0.2, 0.5), x = vec2(0.8, 0.1);
        Geodesic geo = geodesic_bvp(p, y, x);
        double expect = std::exp(-(x - y).dot(xi));
        CHECK(wilson_line(p, geo)(0, 0).real() == doctest::Approx(expect).epsilon(1e-10));
    }

    SUBCASE("constant non-commuting connection vs dense ordered product") {
        LaplaceProblem p = presets::nonabelian_su2(0.4, 0.25);
        Vec y = vec2(-0.3, -0.2), x = vec2(0.6, 0.7);
        Geodesic geo = geodesic_bvp(p, y, x);
        CMat W = wilson_line(p, geo);

        // straight segment, constant integrand: the ordered product collapses
        // to a single exponential; check against a dense 10^4-slice product
        Vec u = x - y;
        auto Bs = p.connection_at(y);
        CMat M = -u[0] * Bs[0] - u[1] * Bs[1];
        const int slices = 10000;
        CMat dense = CMat::Identity(2, 2);
        CMat step = CMat::Identity(2, 2) + M / slices +
                    0.5 * (M / slices) * (M / slices);
        for (int i = 0; i < slices; ++i) dense = (step * dense).eval();
        CHECK((W - dense).norm() < 1e-6);
        CHECK((W * W.adjoint() - CMat::Identity(2, 2)).norm() < 10 * gopt.ode_tol);
    }

    SUBCASE("reversed geodesic gives the inverse transport") {
        LaplaceProblem p = presets::nonabelian_su2();
        Geodesic geo = geodesic_bvp(p, vec2(-0.4, 0.2), vec2(0.7, -0.5));
        CMat Wf = wilson_line(p, geo);
        CMat Wb = wilson_line(p, reversed(geo));
        CHECK((Wb * Wf - CMat::Identity(2, 2)).norm() < 10 * gopt.ode_tol);
    }
}

TEST_CASE("geodesic flow checkpointing is consistent") {
    LaplaceProblem p = presets::nonabelian_su2();
    GeomOptions gopt;
    Geodesic geo = geodesic_bvp(p, vec2(0.0, 0.0), vec2(0.9, 0.4), gopt);
    GeodesicFlow flow(p, geo, gopt);
    // out-of-order queries agree with a fresh forward pass
    CMat w_half = flow.wilson(0.5);
    CMat w_quarter = flow.wilson(0.25);
    GeodesicFlow flow2(p, geo, gopt);
    CMat w_quarter2 = flow2.wilson(0.25);
    CHECK((w_quarter - w_quarter2).norm() < 1e-11);
    CHECK((flow.wilson_inv(0.5) * w_half - CMat::Identity(2, 2)).norm() < 1e-11);
    CHECK((flow.position(1.0) - geo.end).norm() < 1e-10);
}

TEST_CASE("problem validation rejects bad fields") {
    LaplaceProblem p = presets::flat(1, 1);
    p.potential = [](const Vec&) {
        CMat v(1, 1);
        v(0, 0) = Complex(0.0, 0.3);  // not Hermitian
        return v;
    };
    CHECK_THROWS_AS(p.validate(), ConfigError);

    LaplaceProblem q = presets::flat(2, 1);
    q.metric_inv = [](const Vec&) {
        Mat g(2, 2);
        g << 1.0, 2.0, 2.0, 1.0;  // indefinite
        return g;
    };
    CHECK_THROWS_AS(q.validate(), ConfigError);

    CHECK_NOTHROW(presets::polar_flat().validate());
    CHECK_NOTHROW(presets::nonabelian_su2().validate());
}
