#include "heatlab/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "heatlab/feynman_kac.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/presets.hpp"
#include "heatlab/psi.hpp"
#include "heatlab/quadrature.hpp"
#include "heatlab/rng.hpp"
#include "heatlab/synge.hpp"

namespace heatlab {

double mehler_oracle(double omega, double x, double y, double tau) {
    if (!(tau > 0.0)) throw ConfigError("mehler_oracle: tau must be positive");
    if (omega < 1e-12) {
        return std::exp(-(x - y) * (x - y) / (4.0 * tau)) / std::sqrt(4.0 * M_PI * tau);
    }
    const double s = std::sinh(2.0 * omega * tau);
    const double c = std::cosh(2.0 * omega * tau);
    return std::sqrt(omega / (2.0 * M_PI * s)) *
           std::exp(-omega * ((x * x + y * y) * c - 2.0 * x * y) / (2.0 * s));
}

double mehler_heat_residual(double omega, double x, double y, double tau) {
    const double dtau = 1e-5;
    const double dx = 1e-3;
    const double dKdt =
        (mehler_oracle(omega, x, y, tau + dtau) - mehler_oracle(omega, x, y, tau - dtau)) /
        (2.0 * dtau);
    // 4th-order second derivative in x
    const double d2K = (-mehler_oracle(omega, x + 2 * dx, y, tau) +
                        16 * mehler_oracle(omega, x + dx, y, tau) -
                        30 * mehler_oracle(omega, x, y, tau) +
                        16 * mehler_oracle(omega, x - dx, y, tau) -
                        mehler_oracle(omega, x - 2 * dx, y, tau)) /
                       (12.0 * dx * dx);
    const double AK = -d2K + omega * omega * x * x * mehler_oracle(omega, x, y, tau);
    return std::abs(dKdt + AK);
}

namespace {

using Clock = std::chrono::steady_clock;

Vec polar_of(const Vec& cart) {
    return vec2(std::hypot(cart[0], cart[1]), std::atan2(cart[1], cart[0]));
}

double erf_mass(double a, double b, double mu, double s) {
    auto Phi = [](double t) { return 0.5 * (1.0 + std::erf(t / std::sqrt(2.0))); };
    return Phi((b - mu) / s) - Phi((a - mu) / s);
}

/// Truncated short-time kernel from transport coefficients.
CMat truncated_kernel(SdwEngine& eng, const Vec& x, const Vec& y, double tau, int K,
                      const SyngeOptions& sopt) {
    const int d = eng.problem().dim;
    double sigma = world_function(eng.problem(), x, y, sopt).sigma;
    double dsq = eng.delta_sqrt(x, y);
    CMat sum = CMat::Zero(eng.problem().fiber_dim, eng.problem().fiber_dim);
    double tp = 1.0;
    for (int k = 0; k <= K; ++k) {
        sum += tp * eng.a(k, x, y);
        tp *= tau;
    }
    return CMat(std::pow(4.0 * M_PI * tau, -0.5 * d) * std::exp(-sigma / (2.0 * tau)) *
                dsq * sum);
}

}  // namespace

CheckReport chart_consistency(const std::vector<std::pair<Vec, Vec>>& cart_pairs,
                              const ScalarField& potential, double tol_geom,
                              double tol_coeff, const SdwOptions& opt) {
    LaplaceProblem cart = presets::flat(2, 1);
    LaplaceProblem polar = presets::polar_flat();
    if (potential) {
        cart.potential = [potential](const Vec& x) {
            return CMat(potential(x) * CMat::Identity(1, 1));
        };
        polar.potential = [potential](const Vec& p) {
            Vec c = vec2(p[0] * std::cos(p[1]), p[0] * std::sin(p[1]));
            return CMat(potential(c) * CMat::Identity(1, 1));
        };
    }

    SdwEngine eng_cart(cart, opt);
    SdwEngine eng_polar(polar, opt);
    SyngeOptions sopt = opt.synge;

    double sigma_err = 0.0, delta_err = 0.0, a0_err = 0.0, a1_err = 0.0;
    for (const auto& [P, Q] : cart_pairs) {
        Vec Pp = polar_of(P), Qp = polar_of(Q);
        SyngeData sc = world_function(cart, P, Q, sopt);
        SyngeData sp = world_function(polar, Pp, Qp, sopt);
        sigma_err = std::max(sigma_err, std::abs(sc.sigma - sp.sigma));
        double dc = van_vleck(cart, P, Q, sopt);
        double dp = van_vleck(polar, Pp, Qp, sopt);
        delta_err = std::max(delta_err, std::abs(dc - dp));
        a0_err = std::max(a0_err, (eng_cart.a(0, P, Q) - eng_polar.a(0, Pp, Qp)).norm());
        a1_err = std::max(a1_err, (eng_cart.a(1, P, Q) - eng_polar.a(1, Pp, Qp)).norm());
    }

    CheckReport rep;
    rep.check_id = "chart_consistency";
    rep.quantities["sigma_err"] = sigma_err;
    rep.quantities["delta_err"] = delta_err;
    rep.quantities["a0_err"] = a0_err;
    rep.quantities["a1_err"] = a1_err;
    double scaled = std::max({sigma_err / tol_geom, delta_err / tol_geom,
                              a0_err / tol_geom, a1_err / tol_coeff});
    rep.quantities["max_scaled_residual"] = scaled;
    rep.tolerance = 1.0;
    rep.passed = scaled <= 1.0;
    return rep;
}

CheckReport hermitian_symmetry_check(const LaplaceProblem& problem, int K,
                                     const std::vector<std::pair<Vec, Vec>>& pairs,
                                     double sym_tol, double tau, const SdwOptions& opt) {
    SdwEngine eng(problem, opt);
    double max_err = 0.0;
    std::vector<double> per_k(K + 1, 0.0);
    // pairs are independent; exercise the engine's concurrent contract
    std::vector<std::vector<double>> errs(pairs.size(), std::vector<double>(K + 1, 0.0));
    parallel_for(static_cast<long>(pairs.size()), [&](long i) {
        const auto& [x, y] = pairs[i];
        for (int k = 0; k <= K; ++k) {
            CMat fwd = eng.a(k, x, y);
            CMat bwd = eng.a(k, y, x);
            errs[i][k] = (fwd.adjoint() - bwd).norm();
        }
    });
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (int k = 0; k <= K; ++k) {
            per_k[k] = std::max(per_k[k], errs[i][k]);
            max_err = std::max(max_err, errs[i][k]);
        }

    // kernel symmetry (truncated) on the first pair
    double kernel_err = 0.0;
    if (!pairs.empty()) {
        const auto& [x, y] = pairs.front();
        CMat kf = truncated_kernel(eng, x, y, tau, K, opt.synge);
        CMat kb = truncated_kernel(eng, y, x, tau, K, opt.synge);
        kernel_err = (kf.adjoint() - kb).norm();
    }

    CheckReport rep;
    rep.check_id = "hermitian_symmetry";
    for (int k = 0; k <= K; ++k) rep.quantities["a" + std::to_string(k) + "_err"] = per_k[k];
    rep.quantities["kernel_err"] = kernel_err;
    rep.quantities["max_err"] = std::max(max_err, kernel_err);
    rep.tolerance = sym_tol;
    rep.passed = std::max(max_err, kernel_err) <= sym_tol;
    return rep;
}

SemigroupDefect semigroup_defect(double a, double b, double tau1, double tau2, double x,
                                 double y) {
    auto K = [](double u, double v, double t) {
        return std::exp(-(u - v) * (u - v) / (4.0 * t)) / std::sqrt(4.0 * M_PI * t);
    };
    quad::Options qopt;
    qopt.abs_tol = 1e-10;
    qopt.rel_tol = 1e-12;
    // fixed pre-split so narrow product Gaussians cannot hide inside one panel
    const int pieces = 8;
    double integral = 0.0;
    for (int i = 0; i < pieces; ++i) {
        double lo = a + (b - a) * i / pieces;
        double hi = a + (b - a) * (i + 1) / pieces;
        integral += quad::integrate(
            [&](double z) { return K(x, z, tau1) * K(z, y, tau2); }, lo, hi, qopt);
    }
    SemigroupDefect out;
    out.quadrature = integral;
    out.composed = K(x, y, tau1 + tau2);
    out.defect = std::abs(out.composed - integral);
    const double mu = (tau2 * x + tau1 * y) / (tau1 + tau2);
    const double s = std::sqrt(2.0 * tau1 * tau2 / (tau1 + tau2));
    out.oracle = out.composed * (1.0 - erf_mass(a, b, mu, s));
    return out;
}

ExpansionFit expansion_vs_oracle(double x, double y, const std::vector<double>& tau_grid,
                                 int k_order, const SdwOptions& opt) {
    LaplaceProblem problem = presets::harmonic(1.0);
    SdwEngine eng(problem, opt);
    Vec xv = vec1(x), yv = vec1(y);

    ExpansionFit fit;
    fit.tau_grid = tau_grid;
    for (double tau : tau_grid) {
        double kt = truncated_kernel(eng, xv, yv, tau, k_order, opt.synge)(0, 0).real();
        double ko = mehler_oracle(1.0, x, y, tau);
        fit.rel_err.push_back(std::abs(kt - ko) / std::abs(ko));
    }
    // least-squares slope of log(err) vs log(tau)
    const int n = static_cast<int>(tau_grid.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        double lx = std::log(tau_grid[i]);
        double ly = std::log(std::max(fit.rel_err[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    fit.fitted_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return fit;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

namespace {

struct CheckDef {
    std::string id;
    bool heavy;  // only in --suite all
    std::function<CheckReport(std::uint64_t)> body;
};

CheckReport simple_report(const std::string& id, double residual, double tol,
                          std::map<std::string, double> extra = {}) {
    CheckReport rep;
    rep.check_id = id;
    rep.quantities = std::move(extra);
    rep.quantities["residual"] = residual;
    rep.tolerance = tol;
    rep.passed = residual <= tol;
    return rep;
}

std::vector<std::pair<Vec, Vec>> sample_pairs_box(int n, std::uint64_t seed, const Box& box,
                                                  double margin, double min_sep,
                                                  double max_sep) {
    RngStream rng(seed, 777);
    std::vector<std::pair<Vec, Vec>> out;
    const int d = box.dim();
    while (static_cast<int>(out.size()) < n) {
        Vec a(d), b(d);
        for (int i = 0; i < d; ++i) {
            a[i] = box.lo[i] + margin +
                   (box.hi[i] - box.lo[i] - 2 * margin) * rng.uniform();
            b[i] = box.lo[i] + margin +
                   (box.hi[i] - box.lo[i] - 2 * margin) * rng.uniform();
        }
        double sep = (a - b).norm();
        if (sep < min_sep || sep > max_sep) continue;
        out.emplace_back(a, b);
    }
    return out;
}

// Points in a polar-chart sector whose connecting chords stay inside the chart.
std::vector<std::pair<Vec, Vec>> sample_pairs_polar(int n, std::uint64_t seed) {
    RngStream rng(seed, 778);
    std::vector<std::pair<Vec, Vec>> out;
    while (static_cast<int>(out.size()) < n) {
        double r1 = 0.8 + 1.4 * rng.uniform();
        double r2 = 0.8 + 1.4 * rng.uniform();
        double t1 = -0.9 + 1.8 * rng.uniform();
        double t2 = -0.9 + 1.8 * rng.uniform();
        Vec a = vec2(r1, t1), b = vec2(r2, t2);
        if ((a - b).norm() < 0.2) continue;
        out.emplace_back(a, b);
    }
    return out;
}

std::vector<std::pair<Vec, Vec>> physical_pairs_from_polar(
    const std::vector<std::pair<Vec, Vec>>& polar_pairs) {
    std::vector<std::pair<Vec, Vec>> out;
    for (const auto& [a, b] : polar_pairs) {
        out.emplace_back(vec2(a[0] * std::cos(a[1]), a[0] * std::sin(a[1])),
                         vec2(b[0] * std::cos(b[1]), b[0] * std::sin(b[1])));
    }
    return out;
}

std::vector<CheckDef> make_suite() {
    std::vector<CheckDef> defs;
    auto add = [&](const std::string& id, bool heavy,
                   std::function<CheckReport(std::uint64_t)> body) {
        defs.push_back({id, heavy, std::move(body)});
    };

    // ---- oracles validate themselves before anything else uses them ----
    add("oracle.mehler_selfcheck", false, [](std::uint64_t) {
        double res = mehler_heat_residual(1.0, 0.3, -0.2, 0.4);
        double limit_err =
            std::abs(mehler_oracle(1e-13, 1.0, 0.0, 0.5) - free_kernel(1, vec1(1.0), vec1(0.0), 0.5));
        double sym_err = std::abs(mehler_oracle(1.0, 0.7, -0.3, 0.5) -
                                  mehler_oracle(1.0, -0.3, 0.7, 0.5));
        return simple_report("oracle.mehler_selfcheck",
                             std::max({res, limit_err, sym_err}), 1e-6,
                             {{"heat_residual", res},
                              {"free_limit_err", limit_err},
                              {"symmetry_err", sym_err}});
    });

    add("geometry.polar_christoffel", false, [](std::uint64_t) {
        LaplaceProblem polar = presets::polar_flat();
        auto G = christoffel(polar, vec2(2.0, 0.0));
        double err = std::max({std::abs(G[0](1, 1) + 2.0), std::abs(G[1](0, 1) - 0.5),
                               std::abs(G[0](0, 0)), std::abs(G[1](1, 1)),
                               std::abs(G[0](0, 1)), std::abs(G[1](0, 0))});
        return simple_report("geometry.polar_christoffel", err, 1e-8);
    });

    add("geometry.energy_drift", false, [](std::uint64_t) {
        LaplaceProblem polar = presets::polar_flat();
        GeomOptions gopt;
        Geodesic geo = geodesic_ivp(polar, vec2(1.2, 0.3), vec2(0.5, 0.4), gopt);
        double drift = 0.0;
        for (const auto& k : geo.knots) {
            Mat g_lower;
            double det;
            invert_spd(polar.metric_inv(k.pos), g_lower, det);
            double e = k.vel.dot(g_lower * k.vel);
            drift = std::max(drift, std::abs(e - geo.energy) / geo.energy);
        }
        return simple_report("geometry.energy_drift", drift, 10.0 * gopt.ode_tol);
    });

    add("geometry.bvp_roundtrip", false, [](std::uint64_t seed) {
        LaplaceProblem polar = presets::polar_flat();
        GeomOptions gopt;
        double err = 0.0;
        for (const auto& [y, x] : sample_pairs_polar(10, seed)) {
            Geodesic geo = geodesic_bvp(polar, y, x, gopt);
            Geodesic ivp = geodesic_ivp(polar, y, geo.v0, gopt);
            err = std::max(err, (ivp.end - x).norm());
        }
        return simple_report("geometry.bvp_roundtrip", err, gopt.bvp_tol);
    });

    add("geometry.wilson_reverse", false, [](std::uint64_t) {
        LaplaceProblem p = presets::nonabelian_su2();
        GeomOptions gopt;
        Geodesic geo = geodesic_bvp(p, vec2(-0.4, 0.2), vec2(0.7, -0.5), gopt);
        CMat Wf = wilson_line(p, geo, gopt);
        CMat Wb = wilson_line(p, reversed(geo), gopt);
        double err = (Wb * Wf - CMat::Identity(2, 2)).norm();
        return simple_report("geometry.wilson_reverse", err, 10.0 * gopt.ode_tol);
    });

    add("synge.hamilton_jacobi", false, [](std::uint64_t seed) {
        SyngeOptions sopt;
        double err = 0.0;
        LaplaceProblem flat = presets::flat(2, 1);
        for (const auto& [x, y] :
             sample_pairs_box(100, seed, flat.chart_domain, 0.3, 0.1, 3.0)) {
            SyngeData sd = world_function(flat, x, y, sopt);
            err = std::max(err, std::abs(sd.sigma_lower.dot(sd.sigma_upper) - 2 * sd.sigma));
        }
        LaplaceProblem polar = presets::polar_flat();
        for (const auto& [x, y] : sample_pairs_polar(100, seed + 1)) {
            SyngeData sd = world_function(polar, x, y, sopt);
            err = std::max(err, std::abs(sd.sigma_lower.dot(sd.sigma_upper) - 2 * sd.sigma));
        }
        return simple_report("synge.hamilton_jacobi", err, 10.0 * sopt.geom.bvp_tol);
    });

    add("synge.symmetry", false, [](std::uint64_t seed) {
        SyngeOptions sopt;
        double err = 0.0;
        LaplaceProblem polar = presets::polar_flat();
        for (const auto& [x, y] : sample_pairs_polar(30, seed + 2)) {
            double s1 = world_function(polar, x, y, sopt).sigma;
            double s2 = world_function(polar, y, x, sopt).sigma;
            err = std::max(err, std::abs(s1 - s2));
        }
        return simple_report("synge.symmetry", err, 10.0 * sopt.geom.bvp_tol);
    });

    add("synge.lambda_scaling", false, [](std::uint64_t seed) {
        SyngeOptions sopt;
        LaplaceProblem polar = presets::polar_flat();
        double err = 0.0;
        for (const auto& [y, x] : sample_pairs_polar(5, seed + 3)) {
            Geodesic geo = geodesic_bvp(polar, y, x, sopt.geom);
            GeodesicFlow flow(polar, geo, sopt.geom);
            double sig = world_function(polar, x, y, sopt).sigma;
            for (double lam : {0.25, 0.5, 0.75}) {
                double s_lam = world_function(polar, flow.position(lam), y, sopt).sigma;
                err = std::max(err, std::abs(s_lam - lam * lam * sig));
            }
        }
        return simple_report("synge.lambda_scaling", err, 10.0 * sopt.geom.bvp_tol);
    });

    add("synge.vanvleck_flat", false, [](std::uint64_t seed) {
        SyngeOptions sopt;
        LaplaceProblem flat = presets::flat(2, 1);
        double err = 0.0;
        for (const auto& [x, y] :
             sample_pairs_box(5, seed + 4, flat.chart_domain, 0.4, 0.3, 2.5)) {
            err = std::max(err, std::abs(van_vleck(flat, x, y, sopt) - 1.0));
        }
        LaplaceProblem polar = presets::polar_flat();
        for (const auto& [x, y] : sample_pairs_polar(5, seed + 5)) {
            double dxy = van_vleck(polar, x, y, sopt);
            double dyx = van_vleck(polar, y, x, sopt);
            err = std::max({err, std::abs(dxy - 1.0), std::abs(dxy - dyx)});
        }
        return simple_report("synge.vanvleck_flat", err, 1e-6);
    });

    add("sdw.a0_closed_forms", false, [](std::uint64_t) {
        GeomOptions gopt;
        Vec xi = vec2(0.3, -0.2);
        LaplaceProblem p = presets::constant_abelian(xi, 0.0);
        SdwEngine eng(p, {});
        Vec x = vec2(0.9, 0.4), y = vec2(-0.3, 0.1);
        double expect = std::exp(-(x - y).dot(xi));
        double err = std::abs(eng.a(0, x, y)(0, 0).real() - expect);
        err = std::max(err, (eng.a(0, x, x) - CMat::Identity(1, 1)).norm());
        return simple_report("sdw.a0_closed_forms", err, 10.0 * gopt.ode_tol);
    });

    add("sdw.constant_closed_form", false, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(1.0, 1, 1);
        SdwEngine eng(p, {});
        Vec x = vec1(0.4), y = vec1(0.1);
        double err = 0.0;
        double fact = 1.0;
        for (int k = 0; k <= 2; ++k) {
            if (k > 0) fact *= k;
            err = std::max(err, std::abs(eng.a(k, x, y)(0, 0).real() - 1.0 / fact));
        }
        return simple_report("sdw.constant_closed_form", err, 1e-6);
    });

    add("sdw.budget_guard", false, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(1.0, 1, 1);
        SdwOptions opt;
        opt.max_evals = 10;
        SdwEngine eng(p, opt);
        bool threw = false;
        try {
            eng.a(3, vec1(0.4), vec1(0.1));
        } catch (const CostBudgetExceeded&) {
            threw = true;
        }
        return simple_report("sdw.budget_guard", threw ? 0.0 : 1.0, 0.5);
    });

    add("psi.rearrangement", false, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(0.8, 1, 1);
        auto src = std::make_shared<ConstantPotentialSource>(1, 1, Complex(0.8, 0.0));
        PsiEngine eng(p, src);
        Vec x = vec1(0.7), y = vec1(0.2);
        double err = 0.0;
        for (double tau : {0.3, 0.7}) {
            CMat a = eng.kernel_from_psi(x, y, tau, -8, 4);
            CMat b = eng.kernel_direct(x, y, tau, -8, 4);
            err = std::max(err, (a - b).norm() / std::max(1.0, b.norm()));
        }
        return simple_report("psi.rearrangement", err, 1e-12);
    });

    add("psi.zero_mode", false, [](std::uint64_t) {
        LaplaceProblem p = presets::flat(2, 1);
        auto src = std::make_shared<ConstantPotentialSource>(2, 1, Complex(0.0, 0.0));
        PsiEngine eng(p, src);
        Vec x = vec2(0.6, -0.2), y = vec2(-0.4, 0.5);
        MatrixField field = [&](const Vec& z) { return eng.psi(0, z, y, 4).value; };
        SdwEngine stencil_eng(p, {});
        CMat APsi0 = stencil_eng.apply_A(field, x, stencil_eng.stencil_for(x, y));
        return simple_report("psi.zero_mode", APsi0.norm(), 1e-6);
    });

    add("psi.binomial", false, [](std::uint64_t) {
        double err = 0.0;
        // k = 1, s/tau = 1/2: converges to 1/(tau+s)
        const double tau = 0.8, s = 0.4;
        err = std::max(err, std::abs(binomial_partial_sum(1.0, s, tau, 40) - 1.0 / (tau + s)));
        // k = -2: exact binomial at N = 2
        err = std::max(err,
                       std::abs(binomial_partial_sum(-2.0, s, tau, 2) - (tau + s) * (tau + s)));
        // k = 0: identically 1
        for (int N : {0, 3, 17})
            err = std::max(err, std::abs(binomial_partial_sum(0.0, s, tau, N) - 1.0));
        // geometric convergence: fitted log-residual ratio near |s/tau|
        double prev = 0.0, slope_sum = 0.0;
        int slope_n = 0;
        for (int N = 6; N <= 26; N += 2) {
            double r = std::abs(binomial_partial_sum(1.5, s, tau, N) -
                                std::pow(tau + s, -1.5));
            if (N > 6 && r > 0 && prev > 0) {
                slope_sum += 0.5 * std::log(r / prev);
                ++slope_n;
            }
            prev = r;
        }
        double ratio = std::exp(slope_sum / slope_n);
        double ratio_err = std::abs(ratio - s / tau) / (s / tau);
        std::map<std::string, double> q{{"ratio_fit", ratio}, {"ratio_err", ratio_err}};
        return simple_report("psi.binomial", std::max(err, ratio_err * 1e-9), 1e-10, q);
    });

    add("psi.shift_free", false, [](std::uint64_t) {
        LaplaceProblem p = presets::flat(1, 1);
        auto src = std::make_shared<ConstantPotentialSource>(1, 1, Complex(0.0, 0.0));
        PsiEngine eng(p, src);
        double r0 = eng.shift_check(vec1(1.0), vec1(0.0), 0.4, 0.0, 12);
        double r = eng.shift_check(vec1(1.0), vec1(0.0), 0.4, 0.05, 12);
        // closed-form cross-check at tau + s
        CMat k_shift = eng.kernel_from_psi(vec1(1.0), vec1(0.0), 0.45, -12, 4);
        double closed = free_kernel(1, vec1(1.0), vec1(0.0), 0.45);
        double closed_err = std::abs(k_shift(0, 0).real() - closed);
        return simple_report("psi.shift_free", std::max({r0, r, closed_err}), 1e-8,
                             {{"residual_s0", r0},
                              {"residual_s005", r},
                              {"closed_form_err", closed_err}});
    });

    add("fk.free_kernel", false, [](std::uint64_t seed) {
        FlatProblem p = presets::free_flat(1, 1);
        McParams mp;
        mp.n_paths = 20000;
        mp.n_steps = 64;
        mp.seed = seed;
        MCEstimate est = kernel_mc(p, vec1(1.0), vec1(0.0), 0.5, mp);
        double expect = std::exp(-0.5) / std::sqrt(2.0 * M_PI);
        double err = std::abs(est.mean(0, 0).real() - expect);
        double var = est.stderr_mat(0, 0);
        return simple_report("fk.free_kernel", std::max(err, var), 1e-12,
                             {{"value", est.mean(0, 0).real()}, {"stderr", var}});
    });

    add("fk.abelian_closed_form", false, [](std::uint64_t seed) {
        Vec xi = vec2(0.4, -0.3);
        FlatProblem p = presets::constant_abelian_flat(xi, 0.6);
        McParams mp;
        mp.n_paths = 5000;
        mp.n_steps = 64;
        mp.seed = seed;
        Vec x = vec2(0.8, 0.1), y = vec2(-0.2, 0.5);
        const double tau = 0.7;
        MCEstimate est = kernel_mc(p, x, y, tau, mp);
        double expect = free_kernel(2, x, y, tau) * std::exp(-(x - y).dot(xi) + tau * 0.6);
        double err = std::abs(est.mean(0, 0).real() - expect);
        double var = est.stderr_mat(0, 0);
        return simple_report("fk.abelian_closed_form", std::max(err, var), 1e-12,
                             {{"value", est.mean(0, 0).real()},
                              {"expected", expect},
                              {"stderr", var}});
    });

    add("fk.bridge_moments", false, [](std::uint64_t seed) {
        const int n_samples = 20000;
        const int steps = 64;
        double sum = 0.0, sumsq = 0.0, pin_err = 0.0, mean_mid = 0.0;
        for (int i = 0; i < n_samples; ++i) {
            RngStream rng(seed, 9000000 + i);
            BridgeLoop loop = sample_bridge(rng, 1, steps);
            double mid = loop.u(steps / 2, 0);
            sum += mid;
            sumsq += mid * mid;
            mean_mid += mid / n_samples;
            pin_err = std::max(pin_err,
                               std::abs(loop.u(0, 0)) + std::abs(loop.u(steps, 0)));
        }
        double var = sumsq / n_samples - (sum / n_samples) * (sum / n_samples);
        double var_sigma = 0.5 * std::sqrt(2.0 / n_samples);  // sd of the variance estimator
        double var_err = std::abs(var - 0.5) / (3.0 * var_sigma);
        double mean_err = std::abs(mean_mid) / (3.0 * std::sqrt(0.5 / n_samples));
        double scaled = std::max({var_err, mean_err, pin_err > 0.0 ? 2.0 : 0.0});
        return simple_report("fk.bridge_moments", scaled, 1.0,
                             {{"var_mid", var}, {"mean_mid", mean_mid}, {"pin_err", pin_err}});
    });

    add("fk.seed_determinism", false, [](std::uint64_t seed) {
        FlatProblem p = presets::harmonic_flat(1.0);
        McParams mp;
        mp.n_paths = 4000;
        mp.n_steps = 32;
        mp.seed = seed;
        MCEstimate e1 = kernel_mc(p, vec1(0.4), vec1(0.1), 0.3, mp);
        MCEstimate e2 = kernel_mc(p, vec1(0.4), vec1(0.1), 0.3, mp);
        mp.seed = seed + 1;
        MCEstimate e3 = kernel_mc(p, vec1(0.4), vec1(0.1), 0.3, mp);
        bool identical = (e1.mean - e2.mean).norm() == 0.0 &&
                         (e1.stderr_mat - e2.stderr_mat).norm() == 0.0;
        bool distinct = (e1.mean - e3.mean).norm() > 0.0;
        return simple_report("fk.seed_determinism",
                             (identical && distinct) ? 0.0 : 1.0, 0.5);
    });

    add("semigroup.defect", false, [](std::uint64_t) {
        SemigroupDefect big = semigroup_defect(0.0, 1.0, 0.5, 0.5, 0.5, 0.5);
        SemigroupDefect tiny = semigroup_defect(0.0, 1.0, 1e-4, 1e-4, 0.5, 0.5);
        SemigroupDefect whole = semigroup_defect(-40.0, 41.0, 0.5, 0.5, 0.5, 0.5);
        bool ok = big.defect > 1e-3 && std::abs(big.defect - big.oracle) < 1e-6 &&
                  tiny.defect < 1e-8 && whole.defect < 1e-10;
        return simple_report("semigroup.defect", ok ? 0.0 : 1.0, 0.5,
                             {{"defect_large", big.defect},
                              {"oracle_large", big.oracle},
                              {"defect_small", tiny.defect},
                              {"defect_whole_line", whole.defect}});
    });

    // ------------------------------ heavy checks ------------------------------

    add("sdw.constant_k3", true, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(1.0, 1, 1);
        SdwOptions opt;
        SdwEngine eng(p, opt);
        Vec x = vec1(0.4), y = vec1(0.1);
        double err = 0.0;
        double fact = 1.0;
        for (int k = 0; k <= 3; ++k) {
            if (k > 0) fact *= k;
            err = std::max(err, std::abs(eng.a(k, x, y)(0, 0).real() - 1.0 / fact));
        }
        return simple_report("sdw.constant_k3", err, 1e-6,
                             {{"transport_evals", static_cast<double>(eng.evals())}});
    });

    add("sdw.mehler_harmonic", true, [](std::uint64_t) {
        LaplaceProblem p = presets::harmonic(1.0);
        SdwOptions opt;
        SdwEngine eng(p, opt);
        // off-diagonal a_1 equals the line average of the potential
        Vec x = vec1(0.3), y = vec1(0.1);
        double a1 = eng.a(1, x, y)(0, 0).real();
        double a1_oracle = -(0.3 * 0.3 + 0.3 * 0.1 + 0.1 * 0.1) / 3.0;
        double err_offdiag = std::abs(a1 - a1_oracle);
        // diagonal values against the Mehler expansion
        auto diag07 = eng.diagonal(vec1(0.7), 1);
        double err_diag1 = std::abs(diag07[1](0, 0).real() - (-0.49));
        auto diag0 = eng.diagonal(vec1(0.0), 2);
        double err_diag2 = std::abs(diag0[2](0, 0).real() - (-1.0 / 3.0));
        double err = std::max({err_offdiag / 1e-6, err_diag1 / 1e-4, err_diag2 / 1e-3});
        return simple_report("sdw.mehler_harmonic", err, 1.0,
                             {{"a1_offdiag_err", err_offdiag},
                              {"a1_diag_err", err_diag1},
                              {"a2_diag_err", err_diag2}});
    });

    add("sdw.hermitian_nonabelian", true, [](std::uint64_t seed) {
        LaplaceProblem p = presets::nonabelian_su2();
        auto pairs = sample_pairs_box(20, seed + 6, p.chart_domain, 1.0, 0.2, 1.2);
        CheckReport rep = hermitian_symmetry_check(p, 2, pairs, 1e-6);
        rep.check_id = "sdw.hermitian_nonabelian";
        return rep;
    });

    add("sdw.abelian_hermitian", true, [](std::uint64_t seed) {
        LaplaceProblem p = presets::abelian_antihermitian(vec2(0.5, -0.2));
        auto pairs = sample_pairs_box(5, seed + 7, p.chart_domain, 1.0, 0.2, 1.2);
        CheckReport rep = hermitian_symmetry_check(p, 1, pairs, 1e-7);
        rep.check_id = "sdw.abelian_hermitian";
        return rep;
    });

    add("sdw.gauge_covariance", true, [](std::uint64_t) {
        // chi(x) = 0.3 x + 0.1 x^2; B -> B + chi' * I multiplies a_k by
        // exp(chi(y) - chi(x)) in the Abelian scalar case.
        LaplaceProblem base = presets::harmonic(1.0);
        LaplaceProblem gauged = base;
        gauged.connection = [](const Vec& z) {
            std::vector<CMat> Bs(1);
            Bs[0] = (0.3 + 0.2 * z[0]) * CMat::Identity(1, 1);
            return Bs;
        };
        auto chi = [](double x) { return 0.3 * x + 0.1 * x * x; };
        SdwEngine eng0(base, {});
        SdwEngine eng1(gauged, {});
        Vec x = vec1(0.5), y = vec1(0.15);
        double err = 0.0;
        for (int k = 0; k <= 2; ++k) {
            Complex expect =
                std::exp(Complex(chi(y[0]) - chi(x[0]), 0.0)) * eng0.a(k, x, y)(0, 0);
            err = std::max(err, std::abs(eng1.a(k, x, y)(0, 0) - expect));
        }
        return simple_report("sdw.gauge_covariance", err, 1e-6);
    });

    add("sdw.recurrence_residual", true, [](std::uint64_t) {
        SdwOptions opt;
        double err = 0.0;
        LaplaceProblem pc = presets::constant_potential(1.0, 1, 1);
        SdwEngine ec(pc, opt);
        LaplaceProblem ph = presets::harmonic(1.0);
        SdwEngine eh(ph, opt);
        Vec x = vec1(0.45), y = vec1(0.1);
        for (double lam : {0.5, 1.0}) {
            for (int k = 1; k <= 2; ++k) {
                err = std::max(err, ec.recurrence_residual(x, y, k, lam));
                err = std::max(err, eh.recurrence_residual(x, y, k, lam));
            }
        }
        return simple_report("sdw.recurrence_residual", err, opt.recur_tol);
    });

    add("synge.sphere_vanvleck", true, [](std::uint64_t) {
        const double rho = 1.0;
        LaplaceProblem sphere = presets::sphere_patch(rho);
        SyngeOptions sopt;
        Vec x0 = vec2(1.5708, 0.2);
        Vec dir = vec2(0.6, 0.8);
        std::vector<double> s2, dm1;
        for (double s : {0.02, 0.04, 0.08}) {
            Vec y = x0 + (s / dir.norm()) * dir;
            SyngeData sd = world_function(sphere, x0, y, sopt);
            double geodist2 = 2.0 * sd.sigma;
            double delta = van_vleck(sphere, x0, y, sopt);
            s2.push_back(geodist2);
            dm1.push_back(delta - 1.0);
        }
        // least squares through the origin: Delta - 1 = q * s^2
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < s2.size(); ++i) {
            num += s2[i] * dm1[i];
            den += s2[i] * s2[i];
        }
        double q = num / den;
        const double expect = 1.0 / (6.0 * rho * rho);  // scalar curvature / 12
        double rel = std::abs(q - expect) / expect;
        return simple_report("synge.sphere_vanvleck", rel, 0.05,
                             {{"fit_coefficient", q}, {"expected", expect}});
    });

    add("psi.recursion_residuals", true, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(0.7, 2, 1);
        auto src = std::make_shared<ConstantPotentialSource>(2, 1, Complex(0.7, 0.0));
        PsiEngine eng(p, src);
        Vec x = vec2(0.5, -0.1), y = vec2(0.1, 0.3);
        double err = 0.0;
        std::map<std::string, double> q;
        for (int k = -2; k <= 2; ++k) {
            double r = eng.check_psi_recursion(k, x, y, 8);
            q["residual_k" + std::to_string(k)] = r;
            err = std::max(err, r);
        }
        return simple_report("psi.recursion_residuals", err, 1e-4, q);
    });

    add("psi.residual_monotone", true, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(0.7, 2, 1);
        auto src = std::make_shared<ConstantPotentialSource>(2, 1, Complex(0.7, 0.0));
        PsiEngine eng(p, src);
        Vec x = vec2(0.5, -0.1), y = vec2(0.1, 0.3);
        double r4 = eng.check_psi_recursion(1, x, y, 4);
        double r8 = eng.check_psi_recursion(1, x, y, 8);
        double r16 = eng.check_psi_recursion(1, x, y, 16);
        bool mono = r8 <= r4 && r16 <= r8;
        return simple_report("psi.residual_monotone", mono ? 0.0 : 1.0, 0.5,
                             {{"r4", r4}, {"r8", r8}, {"r16", r16}});
    });

    add("psi.kernel_split", true, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(0.7, 2, 1);
        auto src = std::make_shared<ConstantPotentialSource>(2, 1, Complex(0.7, 0.0));
        PsiOptions popt;
        PsiEngine eng(p, src, popt);
        Vec x = vec2(0.5, -0.1), y = vec2(0.1, 0.3);
        const double tau = 0.35;
        const int N = 10;
        auto [km, kp] = eng.kernel_split(x, y, tau, N);
        CMat whole = eng.kernel_from_psi(x, y, tau, -N, 1 + N);
        double recomb = (km + kp - whole).norm();
        // fd heat-equation residual for each split part
        const double dtau = 1e-4;
        double heat_err = 0.0;
        SdwEngine stencil_eng(p, popt.sdw);
        for (int part = 0; part < 2; ++part) {
            auto part_at = [&](double t, const Vec& z) {
                auto [m2, p2] = eng.kernel_split(z, y, t, N);
                return part == 0 ? m2 : p2;
            };
            CMat dK = (part_at(tau + dtau, x) - part_at(tau - dtau, x)) / (2.0 * dtau);
            MatrixField fieldx = [&](const Vec& z) { return part_at(tau, z); };
            CMat AK = stencil_eng.apply_A(fieldx, x, stencil_eng.stencil_for(x, y));
            heat_err = std::max(heat_err, (dK + AK).norm());
        }
        double scaled = std::max(recomb / 1e-12, heat_err / 1e-4);
        return simple_report("psi.kernel_split", scaled, 1.0,
                             {{"recombination_err", recomb}, {"heat_residual", heat_err}});
    });

    add("psi.shift_const", true, [](std::uint64_t) {
        LaplaceProblem p = presets::constant_potential(1.0, 1, 1);
        auto src = std::make_shared<ConstantPotentialSource>(1, 1, Complex(1.0, 0.0));
        PsiEngine eng(p, src);
        double r = eng.shift_check(vec1(0.6), vec1(0.2), 0.4, 0.05, 12);
        // closed form: free * e^{c tau} at tau + s
        CMat ks = eng.kernel_from_psi(vec1(0.6), vec1(0.2), 0.45, -12, 6);
        double closed = free_kernel(1, vec1(0.6), vec1(0.2), 0.45) * std::exp(0.45);
        double closed_err = std::abs(ks(0, 0).real() - closed);
        return simple_report("psi.shift_const", std::max(r, closed_err), 1e-6,
                             {{"shift_residual", r}, {"closed_form_err", closed_err}});
    });

    add("psi.delta_regularization", true, [](std::uint64_t) {
        LaplaceProblem p = presets::flat(1, 1);
        auto src = std::make_shared<ConstantPotentialSource>(1, 1, Complex(0.0, 0.0));
        PsiEngine eng(p, src);
        Vec x = vec1(0.3);
        ScalarField bump = [](const Vec& z) {
            return std::exp(-(z[0] - 0.3) * (z[0] - 0.3) / (2.0 * 0.25));
        };
        double e1 = eng.delta_regularization_check(x, 1e-3, bump, 1.5);
        double e2 = eng.delta_regularization_check(x, 5e-4, bump, 1.5);
        double halving = e2 / e1;  // first-order in eps: should be close to 1/2
        ScalarField one = [](const Vec&) { return 1.0; };
        double mass_err = eng.delta_regularization_check(x, 1e-3, one, 1.5);
        bool ok = e1 < 1e-2 && halving > 0.35 && halving < 0.65 && mass_err < 1e-4;
        return simple_report("psi.delta_regularization", ok ? 0.0 : 1.0, 0.5,
                             {{"err_eps1e3", e1},
                              {"err_eps5e4", e2},
                              {"halving_ratio", halving},
                              {"normalization_err", mass_err}});
    });

    add("fk.mehler_mc", true, [](std::uint64_t seed) {
        FlatProblem p = presets::harmonic_flat(1.0);
        McParams mp;
        mp.n_paths = 200000;
        mp.n_steps = 128;
        mp.seed = seed;
        const double x = 0.5, y = 0.2, tau = 0.3;
        MCEstimate est = kernel_mc(p, vec1(x), vec1(y), tau, mp);
        double oracle = mehler_oracle(1.0, x, y, tau);
        double dev = std::abs(est.mean(0, 0).real() - oracle);
        double se = est.stderr_mat(0, 0);
        double scaled = std::max(dev / (3.0 * se), se / (0.01 * oracle));
        return simple_report("fk.mehler_mc", scaled, 1.0,
                             {{"mc_value", est.mean(0, 0).real()},
                              {"oracle", oracle},
                              {"stderr", se}});
    });

    add("fk.scaling_lemma", true, [](std::uint64_t seed) {
        FlatProblem p = presets::harmonic_flat(1.0);
        McParams mp;
        mp.n_paths = 20000;
        mp.n_steps = 64;
        mp.seed = seed;
        double worst = 0.0;
        std::map<std::string, double> q;
        for (double tau : {0.25, 1.0}) {
            Vec x = vec1(0.4);
            ScalingCheckResult res = scaling_check(p, x, x, x, tau, mp);
            double scaled = res.coupled_diff / (3.0 * res.coupled_stderr + 1e-13);
            q["diff_tau" + std::to_string(tau)] = res.coupled_diff;
            worst = std::max(worst, scaled);
        }
        return simple_report("fk.scaling_lemma", worst, 1.0, q);
    });

    add("fk.diagonal_scaling", true, [](std::uint64_t) {
        LaplaceProblem p = presets::harmonic(1.0);
        SdwOptions opt;
        DiagonalScalingReport rep = diagonal_scaling_check(p, vec1(0.0), 0.25, 2, opt);
        double err = *std::max_element(rep.ratio_error.begin(), rep.ratio_error.end());
        return simple_report("fk.diagonal_scaling", err, opt.recur_tol);
    });

    add("fk.bound_pathwise", true, [](std::uint64_t seed) {
        FlatProblem p = presets::harmonic_flat(1.0);
        McParams mp;
        mp.n_paths = 100000;
        mp.n_steps = 64;
        mp.seed = seed;
        BoundReport rep = bound_check(p, 0.0, vec1(0.3), vec1(-0.1), 1.0, mp);
        return simple_report("fk.bound_pathwise", rep.passed ? 0.0 : 1.0, 0.5,
                             {{"violations", static_cast<double>(rep.violations)},
                              {"max_functional", rep.max_functional},
                              {"mc_mean", rep.mc_mean},
                              {"free_value", rep.free_value}});
    });

    add("fk.two_well_ratio", true, [](std::uint64_t seed) {
        const double c1 = 0.5, c2 = -0.5, tau = 0.8;
        FlatProblem p = presets::two_well_flat(c1, c2, 0.25, 2.0);
        McParams mp;
        mp.n_paths = 50000;
        mp.n_steps = 64;
        mp.seed = seed;
        MCEstimate k1 = kernel_mc(p, vec1(-2.0), vec1(-2.0), tau, mp);
        MCEstimate k2 = kernel_mc(p, vec1(2.0), vec1(2.0), tau, mp);
        double v1 = k1.mean(0, 0).real(), v2 = k2.mean(0, 0).real();
        double ratio = v1 / v2;
        double expect = std::exp((c1 - c2) * tau);
        double se_ratio = ratio * std::sqrt(std::pow(k1.stderr_mat(0, 0) / v1, 2) +
                                            std::pow(k2.stderr_mat(0, 0) / v2, 2));
        double scaled = std::abs(ratio - expect) / (3.0 * se_ratio);
        return simple_report("fk.two_well_ratio", scaled, 1.0,
                             {{"ratio", ratio}, {"expected", expect}, {"stderr", se_ratio}});
    });

    add("fk.discretization", true, [](std::uint64_t seed) {
        FlatProblem p = presets::harmonic_flat(1.0);
        McParams mp;
        mp.n_paths = 50000;
        mp.seed = seed;
        mp.n_steps = 64;
        MCEstimate e64 = kernel_mc(p, vec1(0.5), vec1(0.2), 0.5, mp);
        mp.n_steps = 128;
        MCEstimate e128 = kernel_mc(p, vec1(0.5), vec1(0.2), 0.5, mp);
        double dev = std::abs(e64.mean(0, 0).real() - e128.mean(0, 0).real());
        double se = std::hypot(e64.stderr_mat(0, 0), e128.stderr_mat(0, 0));
        return simple_report("fk.discretization", dev / (3.0 * se), 1.0,
                             {{"mean_64", e64.mean(0, 0).real()},
                              {"mean_128", e128.mean(0, 0).real()}});
    });

    add("fk.tau0_consistency", true, [](std::uint64_t seed) {
        FlatProblem p = presets::harmonic_flat(1.0);
        McParams mp;
        mp.n_paths = 20000;
        mp.n_steps = 64;
        mp.seed = seed;
        const double tau = 1e-3;
        Vec x = vec1(0.4), y = vec1(0.1);
        MCEstimate est = kernel_mc(p, x, y, tau, mp);
        double pref = free_kernel(1, x, y, tau);
        double dev = std::abs(est.mean(0, 0).real() / pref - 1.0);  // a_0 = 1 here
        double bound = 3.0 * est.stderr_mat(0, 0) / pref + 5.0 * tau;
        return simple_report("fk.tau0_consistency", dev / bound, 1.0,
                             {{"deviation", dev}, {"bound", bound}});
    });

    add("chart.consistency", true, [](std::uint64_t seed) {
        auto polar_pairs = sample_pairs_polar(10, seed + 8);
        auto cart_pairs = physical_pairs_from_polar(polar_pairs);
        ScalarField v = [](const Vec& x) { return x[0]; };
        CheckReport rep = chart_consistency(cart_pairs, v, 1e-6, 1e-4);
        rep.check_id = "chart.consistency";
        return rep;
    });

    add("expansion.order", true, [](std::uint64_t) {
        ExpansionFit fit = expansion_vs_oracle(0.3, 0.1, {0.02, 0.04, 0.08}, 2);
        double rel_at_005 = expansion_vs_oracle(0.3, 0.1, {0.05}, 2).rel_err[0];
        double order_err = std::abs(fit.fitted_order - 3.0);
        double scaled = std::max(rel_at_005 / 1e-3, order_err / 0.3);
        return simple_report("expansion.order", scaled, 1.0,
                             {{"rel_err_tau005", rel_at_005},
                              {"fitted_order", fit.fitted_order}});
    });

    return defs;
}

}  // namespace

std::vector<CheckReport> run_suite(const std::string& which, std::uint64_t seed,
                                   int threads) {
    if (which != "all" && which != "fast")
        throw ConfigError("run_suite: suite must be 'all' or 'fast'");
    auto defs = make_suite();
    std::vector<CheckDef> selected;
    for (auto& d : defs)
        if (which == "all" || !d.heavy) selected.push_back(std::move(d));

    std::vector<CheckReport> reports(selected.size());
    parallel_for(
        static_cast<long>(selected.size()),
        [&](long i) {
            auto t0 = Clock::now();
            try {
                reports[i] = selected[i].body(seed);
            } catch (const std::exception& e) {
                reports[i].check_id = selected[i].id;
                reports[i].quantities["exception"] = 1.0;
                reports[i].tolerance = 0.0;
                reports[i].passed = false;
                (void)e;
            }
            reports[i].check_id = selected[i].id;
            reports[i].runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                        Clock::now() - t0)
                                        .count();
        },
        threads);
    return reports;
}

}  // namespace heatlab
