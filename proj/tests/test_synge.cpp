#include <doctest.h>

#include <cmath>

#include "heatlab/presets.hpp"
#include "heatlab/rng.hpp"
#include "heatlab/synge.hpp"

using namespace heatlab;

TEST_CASE("world function in the flat chart") {
    LaplaceProblem flat = presets::flat(2, 1);
    SyngeData sd = world_function(flat, vec2(1.0, 0.0), vec2(0.0, 0.0));
    CHECK(sd.sigma == doctest::Approx(0.5).epsilon(1e-12));
    CHECK((sd.sigma_upper - vec2(1.0, 0.0)).norm() < 1e-10);
    CHECK((sd.sigma_lower - vec2(1.0, 0.0)).norm() < 1e-10);

    // coincidence limit
    SyngeData cd = world_function(flat, vec2(0.4, 0.2), vec2(0.4, 0.2));
    CHECK(cd.sigma == 0.0);
    CHECK(cd.sigma_upper.norm() == 0.0);
    CHECK(cd.vanvleck == 1.0);
}

TEST_CASE("world function in the polar chart") {
    LaplaceProblem polar = presets::polar_flat();
    // physical chord between (1,0) and (0,1) has length sqrt(2)
    SyngeData sd = world_function(polar, vec2(1.0, M_PI / 2), vec2(1.0, 0.0));
    CHECK(sd.sigma == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Hamilton-Jacobi identity and symmetry on random pairs") {
    SyngeOptions sopt;
    const double tol = 10.0 * sopt.geom.bvp_tol;

    LaplaceProblem flat = presets::flat(2, 1);
    RngStream rng(17, 0);
    for (int i = 0; i < 100; ++i) {
        Vec x = vec2(-2.0 + 4.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform());
        Vec y = vec2(-2.0 + 4.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform());
        SyngeData sd = world_function(flat, x, y, sopt);
        CHECK(std::abs(sd.sigma_lower.dot(sd.sigma_upper) - 2.0 * sd.sigma) < tol);
    }

    LaplaceProblem polar = presets::polar_flat();
    for (int i = 0; i < 100; ++i) {
        Vec x = vec2(0.8 + 1.4 * rng.uniform(), -0.9 + 1.8 * rng.uniform());
        Vec y = vec2(0.8 + 1.4 * rng.uniform(), -0.9 + 1.8 * rng.uniform());
        SyngeData sd = world_function(polar, x, y, sopt);
        CHECK(std::abs(sd.sigma_lower.dot(sd.sigma_upper) - 2.0 * sd.sigma) < tol);
        SyngeData sr = world_function(polar, y, x, sopt);
        CHECK(std::abs(sd.sigma - sr.sigma) < tol);
    }
}

TEST_CASE("sigma scales quadratically along the geodesic") {
    LaplaceProblem polar = presets::polar_flat();
    SyngeOptions sopt;
    RngStream rng(23, 0);
    for (int i = 0; i < 5; ++i) {
        Vec y = vec2(0.9 + 1.0 * rng.uniform(), -0.7 + 1.4 * rng.uniform());
        Vec x = vec2(0.9 + 1.0 * rng.uniform(), -0.7 + 1.4 * rng.uniform());
        if ((x - y).norm() < 0.2) continue;
        Geodesic geo = geodesic_bvp(polar, y, x, sopt.geom);
        GeodesicFlow flow(polar, geo, sopt.geom);
        double sig = world_function(polar, x, y, sopt).sigma;
        for (double lam : {0.25, 0.5, 0.75}) {
            double s_lam = world_function(polar, flow.position(lam), y, sopt).sigma;
            CHECK(std::abs(s_lam - lam * lam * sig) < 10.0 * sopt.geom.bvp_tol);
        }
    }
}

TEST_CASE("van Vleck determinant is 1 for the flat plane in both charts") {
    SyngeOptions sopt;
    LaplaceProblem flat = presets::flat(2, 1);
    CHECK(van_vleck(flat, vec2(1.0, 0.5), vec2(-0.3, 0.1), sopt) ==
          doctest::Approx(1.0).epsilon(1e-8));

    LaplaceProblem polar = presets::polar_flat();
    double dp = van_vleck(polar, vec2(1.0, M_PI / 2), vec2(1.0, 0.0), sopt);
    CHECK(dp == doctest::Approx(1.0).epsilon(1e-7));

    // symmetry under endpoint exchange
    double dxy = van_vleck(polar, vec2(1.6, 0.7), vec2(0.9, -0.3), sopt);
    double dyx = van_vleck(polar, vec2(0.9, -0.3), vec2(1.6, 0.7), sopt);
    CHECK(std::abs(dxy - dyx) < 1e-6);
}

TEST_CASE("van Vleck small-separation growth on the sphere") {
    const double rho = 1.0;
    LaplaceProblem sphere = presets::sphere_patch(rho);
    SyngeOptions sopt;
    Vec x0 = vec2(M_PI / 2, 0.2);
    Vec dir = vec2(0.6, 0.8);
    dir /= dir.norm();

    // fit Delta - 1 = q * s^2 against geodesic distance; compare with the
    // expansion coefficient scalar_curvature / 12 = 1 / (6 rho^2), and with
    // the exact round-sphere value psi / sin(psi)
    double num = 0.0, den = 0.0;
    for (double s : {0.02, 0.04, 0.08}) {
        Vec y = x0 + s * dir;
        SyngeData sd = world_function(sphere, x0, y, sopt);
        double delta = van_vleck(sphere, x0, y, sopt);
        double geo2 = 2.0 * sd.sigma;
        num += geo2 * (delta - 1.0);
        den += geo2 * geo2;

        double psi = std::sqrt(geo2) / rho;
        CHECK(delta == doctest::Approx(psi / std::sin(psi)).epsilon(2e-5));
    }
    double q = num / den;
    CHECK(q == doctest::Approx(1.0 / (6.0 * rho * rho)).epsilon(0.05));
}
