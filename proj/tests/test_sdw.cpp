#include <doctest.h>

#include <atomic>
#include <cmath>

#include "heatlab/parallel.hpp"
#include "heatlab/presets.hpp"
#include "heatlab/rng.hpp"
#include "heatlab/sdw.hpp"
#include "oracles.hpp"

using namespace heatlab;

TEST_CASE("apply_A closed forms") {
    SUBCASE("constant field, constant potential") {
        LaplaceProblem p = presets::constant_potential(0.7, 2, 1);
        SdwEngine eng(p, {});
        MatrixField f = [](const Vec&) { return CMat::Identity(1, 1); };
        CMat out = eng.apply_A(f, vec2(0.3, -0.2), 1e-2);
        CHECK(out(0, 0).real() == doctest::Approx(-0.7).epsilon(1e-12));
    }
    SUBCASE("quadratic field, free operator") {
        LaplaceProblem p = presets::flat(2, 1);
        SdwEngine eng(p, {});
        MatrixField f = [](const Vec& z) { return CMat(z[0] * z[0] * CMat::Identity(1, 1)); };
        CMat out = eng.apply_A(f, vec2(0.4, 0.1), 1e-2);
        CHECK(out(0, 0).real() == doctest::Approx(-2.0).epsilon(1e-10));
    }
    SUBCASE("Gaussian field at the origin") {
        const double tau = 1.0;
        LaplaceProblem p = presets::flat(2, 1);
        SdwEngine eng(p, {});
        MatrixField f = [tau](const Vec& z) {
            return CMat(std::exp(-z.squaredNorm() / (4.0 * tau)) * CMat::Identity(1, 1));
        };
        CMat out = eng.apply_A(f, vec2(0.0, 0.0), 1e-2);
        CHECK(out(0, 0).real() == doctest::Approx(2.0 / (2.0 * tau)).epsilon(1e-4));
    }
    SUBCASE("stencil guard") {
        LaplaceProblem p = presets::flat(2, 1);
        SdwEngine eng(p, {});
        MatrixField f = [](const Vec&) { return CMat::Identity(1, 1); };
        CHECK_THROWS_AS(eng.apply_A(f, vec2(2.999, 0.0), 1e-2), OutOfChart);
    }
}

TEST_CASE("a_0 equals the Wilson line") {
    Vec xi = vec2(0.3, -0.2);
    LaplaceProblem p = presets::constant_abelian(xi, 0.0);
    SdwEngine eng(p, {});
    Vec x = vec2(0.9, 0.4), y = vec2(-0.3, 0.1);
    CHECK(eng.a(0, x, y)(0, 0).real() ==
          doctest::Approx(std::exp(-(x - y).dot(xi))).epsilon(1e-10));
    // coincidence limit with a connection present
    CHECK((eng.a(0, x, x) - CMat::Identity(1, 1)).norm() < 1e-12);
}

TEST_CASE("constant potential closed form a_k = c^k / k!") {
    LaplaceProblem p = presets::constant_potential(1.0, 1, 1);
    SdwEngine eng(p, {});
    SdwTable table = eng.coefficients(vec1(0.4), vec1(0.1), 3);
    double fact = 1.0;
    for (int k = 0; k <= 3; ++k) {
        if (k > 0) fact *= k;
        CHECK(std::abs(table.coeffs[k](0, 0).real() - 1.0 / fact) < 1e-6);
        CHECK(std::abs(table.coeffs[k](0, 0).imag()) < 1e-9);
    }
    // base of the recursion reproduces a0 exactly
    CHECK((table.coeffs[0] - eng.a(0, vec1(0.4), vec1(0.1))).norm() == 0.0);
}

TEST_CASE("harmonic potential against the Mehler expansion") {
    // oracle self-validation first
    auto diag07 = test_oracles::mehler_taylor(1.0, 0.7, 0.7, 2);
    CHECK(diag07[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(diag07[1] == doctest::Approx(-0.49).epsilon(1e-6));
    auto diag0 = test_oracles::mehler_taylor(1.0, 0.0, 0.0, 2);
    CHECK(diag0[1] == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(diag0[2] == doctest::Approx(-1.0 / 3.0).epsilon(1e-5));

    LaplaceProblem p = presets::harmonic(1.0);
    SdwEngine eng(p, {});

    // off-diagonal a_1 equals the line average of the potential
    double a1 = eng.a(1, vec1(0.3), vec1(0.1))(0, 0).real();
    CHECK(a1 == doctest::Approx(test_oracles::harmonic_a1_line_average(1.0, 0.3, 0.1))
                    .epsilon(1e-9));

    // diagonal values by Richardson extrapolation
    auto d07 = eng.diagonal(vec1(0.7), 1);
    CHECK((d07[0] - CMat::Identity(1, 1)).norm() < 1e-9);
    CHECK(d07[1](0, 0).real() == doctest::Approx(-0.49).epsilon(2e-4));

    auto d0 = eng.diagonal(vec1(0.0), 2);
    CHECK(std::abs(d0[1](0, 0).real()) < 1e-5);
    CHECK(d0[2](0, 0).real() == doctest::Approx(-1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("recurrence residual along the geodesic") {
    SdwOptions opt;
    Vec x = vec1(0.45), y = vec1(0.1);
    LaplaceProblem pc = presets::constant_potential(1.0, 1, 1);
    SdwEngine ec(pc, opt);
    LaplaceProblem ph = presets::harmonic(1.0);
    SdwEngine eh(ph, opt);
    for (double lam : {0.5, 1.0}) {
        for (int k = 1; k <= 2; ++k) {
            CHECK(ec.recurrence_residual(x, y, k, lam) < opt.recur_tol);
            CHECK(eh.recurrence_residual(x, y, k, lam) < opt.recur_tol);
        }
    }
}

TEST_CASE("Hermitian symmetry of the coefficients") {
    LaplaceProblem p = presets::nonabelian_su2();
    SdwEngine eng(p, {});
    RngStream rng(29, 0);
    for (int i = 0; i < 3; ++i) {
        Vec x = vec2(-0.8 + 1.6 * rng.uniform(), -0.8 + 1.6 * rng.uniform());
        Vec y = vec2(-0.8 + 1.6 * rng.uniform(), -0.8 + 1.6 * rng.uniform());
        if ((x - y).norm() < 0.3) continue;
        for (int k = 0; k <= 2; ++k)
            CHECK((eng.a(k, x, y).adjoint() - eng.a(k, y, x)).norm() < 1e-6);
    }
}

TEST_CASE("gauge covariance under an Abelian gauge transformation") {
    LaplaceProblem base = presets::harmonic(1.0);
    LaplaceProblem gauged = base;
    // chi(z) = 0.3 z + 0.1 z^2, B -> B + chi'
    gauged.connection = [](const Vec& z) {
        std::vector<CMat> Bs(1);
        Bs[0] = (0.3 + 0.2 * z[0]) * CMat::Identity(1, 1);
        return Bs;
    };
    auto chi = [](double v) { return 0.3 * v + 0.1 * v * v; };
    SdwEngine e0(base, {});
    SdwEngine e1(gauged, {});
    Vec x = vec1(0.5), y = vec1(0.15);
    for (int k = 0; k <= 2; ++k) {
        Complex expect = std::exp(Complex(chi(y[0]) - chi(x[0]), 0.0)) * e0.a(k, x, y)(0, 0);
        CHECK(std::abs(e1.a(k, x, y)(0, 0) - expect) < 1e-6);
    }
}

TEST_CASE("cost budget guard") {
    LaplaceProblem p = presets::constant_potential(1.0, 1, 1);
    SdwOptions opt;
    opt.max_evals = 10;
    SdwEngine eng(p, opt);
    CHECK_THROWS_AS(eng.a(3, vec1(0.4), vec1(0.1)), CostBudgetExceeded);
    // the budget is per request: a cheap call afterwards still works
    CHECK((eng.a(0, vec1(0.4), vec1(0.1)) - CMat::Identity(1, 1)).norm() < 1e-12);
}

TEST_CASE("memoization and concurrent evaluation") {
    LaplaceProblem p = presets::constant_potential(0.8, 1, 1);
    SdwEngine eng(p, {});
    Vec x = vec1(0.5), y = vec1(0.2);
    CMat first = eng.a(2, x, y);
    long evals_after_first = eng.evals();
    CMat second = eng.a(2, x, y);
    CHECK(eng.evals() == evals_after_first);  // pure memo hit
    CHECK((first - second).norm() == 0.0);

    // concurrent calls against one engine produce identical values
    std::vector<CMat> results(8);
    parallel_for(8, [&](long i) {
        Vec xi = vec1(0.3 + 0.05 * (i % 4));
        results[i] = eng.a(1, xi, y);
    }, 4);
    for (int i = 0; i < 4; ++i) CHECK((results[i] - results[i + 4]).norm() == 0.0);
}
