#pragma once

#include <string>

#include "heatlab/feynman_kac_types.hpp"
#include "heatlab/geometry.hpp"

namespace heatlab::presets {

/// Euclidean chart on [-3, 3]^d, free operator.
LaplaceProblem flat(int dim = 1, int fiber_dim = 1);

/// Flat R^2 in polar coordinates (r, theta): g^{mu nu} = diag(1, 1/r^2),
/// domain r in [0.2, 3.5], theta in [-2.6, 2.6].
LaplaceProblem polar_flat();

/// Flat metric, v = c * identity.
LaplaceProblem constant_potential(double c, int dim = 1, int fiber_dim = 1);

/// Flat d=1 chart with v(x) = -omega^2 x^2 (so A = -d^2/dx^2 + omega^2 x^2).
LaplaceProblem harmonic(double omega = 1.0);

/// d=1 smooth step between plateau values c1 (x << 0) and c2 (x >> 0), wells
/// centered near -center and +center.
LaplaceProblem two_well(double c1 = 0.5, double c2 = -0.5, double width = 0.25,
                        double center = 2.0);

/// Constant Abelian connection B_mu = xi_mu * I (xi real) and v = c * I.
LaplaceProblem constant_abelian(const Vec& xi, double c = 0.0, int fiber_dim = 1);

/// Constant anti-Hermitian Abelian connection B_mu = i xi_mu * I.
LaplaceProblem abelian_antihermitian(const Vec& xi, double c = 0.0);

/// d=2, m=2 constant non-commuting anti-Hermitian connection
/// (B_1 = i b1 sigma_x, B_2 = i b2 sigma_z) with a Hermitian potential.
LaplaceProblem nonabelian_su2(double b1 = 0.4, double b2 = 0.25);

/// Patch of the round 2-sphere of radius rho in (theta, phi) coordinates,
/// away from the poles.
LaplaceProblem sphere_patch(double rho = 1.0);

// Extended (whole-R^d) problems for the flat-space Monte Carlo representation.
FlatProblem free_flat(int dim = 1, int fiber_dim = 1);
FlatProblem harmonic_flat(double omega = 1.0);
FlatProblem constant_abelian_flat(const Vec& xi, double c = 0.0, int fiber_dim = 1);
FlatProblem two_well_flat(double c1 = 0.5, double c2 = -0.5, double width = 0.25,
                          double center = 2.0);
FlatProblem scalar_flat(int dim, const ScalarField& v, const std::string& name);

/// View of a flat-metric LaplaceProblem as an extended problem (fields are
/// evaluated outside the chart box as given; caller guarantees smooth
/// extension).
FlatProblem extend(const LaplaceProblem& problem);

/// Restrict an extended problem to a chart box.
LaplaceProblem restrict_to_chart(const FlatProblem& problem, const Box& box,
                                 const std::string& name);

}  // namespace heatlab::presets
