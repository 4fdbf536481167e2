#pragma once

#include <optional>
#include <string>
#include <vector>

#include "heatlab/common.hpp"

namespace heatlab {

/// Chart-local specification of the operator
///   A = -g^{-1/2} D_mu g^{1/2} g^{mu nu} D_nu - v,   D_mu = d_mu + B_mu,
/// on an axis-aligned coordinate box. metric_inv returns g^{mu nu}; connection
/// and potential may be empty (treated as zero).
struct LaplaceProblem {
    int dim = 1;
    int fiber_dim = 1;
    MetricField metric_inv;
    ConnectionField connection;  // optional
    MatrixField potential;       // optional
    Box chart_domain;
    std::string name = "custom";

    std::vector<CMat> connection_at(const Vec& x) const;
    CMat potential_at(const Vec& x) const;

    /// Construction-time sanity pass over a sample grid: g^{mu nu} SPD
    /// (Cholesky), v Hermitian, all fields finite. Throws ConfigError.
    void validate(int grid_per_axis = 4) const;
};

struct GeomOptions {
    double ode_tol = 1e-10;
    double bvp_tol = 1e-8;
    int max_newton = 50;
    double fd_step_scale = 1e-4;  // fd_step = scale * box diameter
};

struct MetricPack {
    Mat g_inv;     // g^{mu nu}
    Mat g_lower;   // g_{mu nu}
    double det_g;  // det g_{mu nu}
    double sqrt_g;
};

/// Affinely parametrized geodesic record on [0, 1].
struct Geodesic {
    Vec start;  // y = gamma(0)
    Vec end;    // x = gamma(1) (as integrated)
    Vec v0;     // gamma'(0)
    struct Knot {
        double lambda;
        Vec pos;
        Vec vel;
    };
    std::vector<Knot> knots;  // accepted integrator steps, ascending lambda
    double energy = 0.0;      // g_{mu nu} gamma'^mu gamma'^nu (conserved)
};

MetricPack metric_pack(const LaplaceProblem& problem, const Vec& x);

/// Christoffel symbols of the second kind; result[lam](mu, nu) = Gamma^lam_{mu nu}.
/// Metric derivatives by central differences with one Richardson refinement.
std::vector<Mat> christoffel(const LaplaceProblem& problem, const Vec& x,
                             const GeomOptions& opt = {});

Geodesic geodesic_ivp(const LaplaceProblem& problem, const Vec& x0, const Vec& v0,
                      const GeomOptions& opt = {});

/// Shooting method: Newton on the initial velocity with a finite-difference
/// Jacobian of the endpoint map. Secant initial guess v0 = x - y unless a hint
/// is supplied.
Geodesic geodesic_bvp(const LaplaceProblem& problem, const Vec& y, const Vec& x,
                      const GeomOptions& opt = {}, const Vec* v0_hint = nullptr);

/// Parallel-transport matrix along geo: dW/dl = -gamma'^mu B_mu(gamma) W, W(0) = 1.
CMat wilson_line(const LaplaceProblem& problem, const Geodesic& geo,
                 const GeomOptions& opt = {});

/// Reparametrize a geodesic to run from end to start.
Geodesic reversed(const Geodesic& geo);

/// Lazily integrated view of the joint system (gamma, gamma', W) along one
/// geodesic, with checkpointing so repeated queries at arbitrary lambda are
/// cheap in any order.
class GeodesicFlow {
  public:
    GeodesicFlow(const LaplaceProblem& problem, const Geodesic& geo, GeomOptions opt = {});

    Vec position(double lambda) const;
    Vec velocity(double lambda) const;
    CMat wilson(double lambda) const;
    CMat wilson_inv(double lambda) const;
    double energy() const { return energy_; }

  private:
    const Vec& state_at(double lambda) const;

    const LaplaceProblem& problem_;
    GeomOptions opt_;
    int d_, m_;
    double energy_;
    mutable std::vector<std::pair<double, Vec>> checkpoints_;  // sorted by lambda
};

}  // namespace heatlab
