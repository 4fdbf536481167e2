#pragma once

#include <cstdint>
#include <string>

#include "heatlab/common.hpp"

namespace heatlab {

/// Operator data extended to all of R^d with the metric pinned to the
/// Euclidean one. Fields are assumed smooth with at most polynomial growth
/// (the path-integral representation needs no more than that here).
struct FlatProblem {
    int dim = 1;
    int fiber_dim = 1;
    ConnectionField connection_ext;  // optional
    MatrixField potential_ext;       // optional
    std::string name = "custom";

    std::vector<CMat> connection_at(const Vec& x) const {
        if (connection_ext) return connection_ext(x);
        return std::vector<CMat>(dim, CMat::Zero(fiber_dim, fiber_dim));
    }
    CMat potential_at(const Vec& x) const {
        if (potential_ext) return potential_ext(x);
        return CMat::Zero(fiber_dim, fiber_dim);
    }
};

/// Discrete Brownian-bridge loop: positions u(t_i), t_i = i/n, pinned to zero
/// at both ends, with per-coordinate variance 2 t (1 - t) at time t.
struct BridgeLoop {
    int steps = 0;
    Mat u;  // (steps + 1) x d; rows are u(t_i)
};

/// Matrix-valued Monte Carlo mean with per-entry standard errors.
struct MCEstimate {
    CMat mean;
    Mat stderr_mat;  // sqrt(Var Re + Var Im) / sqrt(n)
    long n_paths = 0;
    int n_steps = 0;
    std::uint64_t seed = 0;
    double tau = 0.0;
    Vec x, y;
};

}  // namespace heatlab
