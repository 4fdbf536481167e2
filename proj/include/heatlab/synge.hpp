#pragma once

#include "heatlab/geometry.hpp"

namespace heatlab {

/// World function data for one endpoint pair: sigma(x, y), its gradients at x
/// (index up and down), and the Van Vleck-Morette determinant when computed.
struct SyngeData {
    Vec x, y;
    double sigma = 0.0;
    Vec sigma_lower;  // g_{mu nu}(x) gamma'^nu(1)
    Vec sigma_upper;  // gamma'^mu(1)
    double vanvleck = 1.0;
};

struct SyngeOptions {
    GeomOptions geom;
    // Endpoint-displacement step for the mixed sigma derivatives. The step is
    // set by the sigma noise floor (roundoff / ODE error divided by step^2),
    // not by |x - y|: a separation-scaled step drowns small-separation
    // determinants in noise. Shrunk near the chart boundary.
    double vv_step = 2e-2;
    double vv_step_min = 1e-5;
    double vv_ode_tol = 1e-13;     // tighter tolerance for the sigma probes
    double coincidence_eps = 1e-12;
};

/// sigma = energy / 2 of the affine geodesic gamma(0) = y, gamma(1) = x, with
/// a first-order correction for the residual endpoint miss of the shooting
/// solve. Gradients from the terminal velocity.
SyngeData world_function(const LaplaceProblem& problem, const Vec& x, const Vec& y,
                         const SyngeOptions& opt = {});

/// Van Vleck determinant: builds -d^2 sigma / dx^mu dy^nu by central
/// differences of world_function over endpoint displacements (one Richardson
/// refinement) and applies the determinant formula with the metric factors.
double van_vleck(const LaplaceProblem& problem, const Vec& x, const Vec& y,
                 const SyngeOptions& opt = {});

/// world_function + vanvleck in one record.
SyngeData synge_full(const LaplaceProblem& problem, const Vec& x, const Vec& y,
                     const SyngeOptions& opt = {});

}  // namespace heatlab
