#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heatlab/common.hpp"
#include "heatlab/sdw.hpp"

namespace heatlab {

/// One verdict from the lemma battery. `passed` holds iff the scaled residual
/// (each quantity divided by its own threshold where several apply) is within
/// `tolerance`. runtime_ms is measured by the suite runner and excluded from
/// the deterministic report serialization.
struct CheckReport {
    std::string check_id;
    std::map<std::string, double> quantities;
    double tolerance = 0.0;
    bool passed = false;
    long runtime_ms = 0;
};

/// Exact kernel of A = -d^2/dx^2 + omega^2 x^2 on the line.
double mehler_oracle(double omega, double x, double y, double tau);

/// |(d_tau + A) K| for the oracle by finite differences; used to validate the
/// oracle before it validates anything else.
double mehler_heat_residual(double omega, double x, double y, double tau);

/// sigma / Delta / a_0 / a_1 agreement between the Cartesian flat chart and
/// the polar chart for the same physical endpoint pairs. `potential` (optional)
/// is a scalar field in Cartesian coordinates, transplanted to the polar chart.
/// Residuals are scaled by (tol_geom, tol_coeff); tolerance of the report is 1.
CheckReport chart_consistency(const std::vector<std::pair<Vec, Vec>>& cart_pairs,
                              const ScalarField& potential, double tol_geom,
                              double tol_coeff, const SdwOptions& opt = {});

/// ||a_k(x,y)^dag - a_k(y,x)|| over sample pairs for k <= K, plus the
/// truncated-kernel symmetry at tau.
CheckReport hermitian_symmetry_check(const LaplaceProblem& problem, int K,
                                     const std::vector<std::pair<Vec, Vec>>& pairs,
                                     double sym_tol, double tau = 0.3,
                                     const SdwOptions& opt = {});

/// Composition defect of the free d=1 kernel over the interval (a, b):
/// | int_a^b K(x,z;tau1) K(z,y;tau2) dz - K(x,y;tau1+tau2) |, with the
/// error-function closed form reported alongside the quadrature value.
struct SemigroupDefect {
    double defect = 0.0;
    double oracle = 0.0;
    double quadrature = 0.0;
    double composed = 0.0;
};
SemigroupDefect semigroup_defect(double a, double b, double tau1, double tau2, double x,
                                 double y);

/// Truncated short-time expansion vs the Mehler oracle on a tau grid:
/// relative error at each tau and the fitted convergence order.
struct ExpansionFit {
    std::vector<double> tau_grid;
    std::vector<double> rel_err;
    double fitted_order = 0.0;
};
ExpansionFit expansion_vs_oracle(double x, double y, const std::vector<double>& tau_grid,
                                 int k_order, const SdwOptions& opt = {});

/// Named check battery. "fast" is the cheap subset; "all" is everything.
std::vector<CheckReport> run_suite(const std::string& which, std::uint64_t seed,
                                   int threads = 0);

}  // namespace heatlab
