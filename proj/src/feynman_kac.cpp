#include "heatlab/feynman_kac.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "heatlab/parallel.hpp"
#include "heatlab/presets.hpp"

namespace heatlab {

BridgeLoop sample_bridge(RngStream& rng, int d, int n_steps) {
    if (n_steps < 2) throw ConfigError("sample_bridge: need at least 2 steps");
    BridgeLoop loop;
    loop.steps = n_steps;
    loop.u.resize(n_steps + 1, d);
    const double sdt = std::sqrt(2.0 / n_steps);  // the action 1/4 int u'^2 has
                                                  // diffusion constant 2
    loop.u.row(0).setZero();
    for (int i = 1; i <= n_steps; ++i)
        for (int j = 0; j < d; ++j) loop.u(i, j) = loop.u(i - 1, j) + sdt * rng.normal();
    // pin the terminal point back to zero: u(t) = W(t) - t W(1)
    for (int i = 1; i < n_steps; ++i) {
        const double t = static_cast<double>(i) / n_steps;
        loop.u.row(i) -= t * loop.u.row(n_steps);
    }
    loop.u.row(n_steps).setZero();
    return loop;
}

CMat ordered_exponential(const BridgeLoop& loop, double tau, const Vec& x, const Vec& y,
                         const FlatProblem& problem) {
    const int d = problem.dim;
    const int m = problem.fiber_dim;
    const int n = loop.steps;
    const double dt = 1.0 / n;
    const double st = std::sqrt(tau);
    const bool has_b = static_cast<bool>(problem.connection_ext);
    const bool has_v = static_cast<bool>(problem.potential_ext);
    if (!has_b && !has_v) return CMat::Identity(m, m);

    Vec zm(d), dz(d);
    if (m == 1) {
        // 1x1 factors commute: accumulate the exponent once.
        Complex S(0.0, 0.0);
        for (int i = 0; i < n; ++i) {
            const double tm = (i + 0.5) * dt;
            for (int j = 0; j < d; ++j) {
                dz[j] = st * (loop.u(i + 1, j) - loop.u(i, j)) + dt * (x[j] - y[j]);
                zm[j] = st * 0.5 * (loop.u(i + 1, j) + loop.u(i, j)) + y[j] +
                        tm * (x[j] - y[j]);
            }
            if (has_b) {
                auto Bs = problem.connection_ext(zm);
                for (int j = 0; j < d; ++j) S -= dz[j] * Bs[j](0, 0);
            }
            if (has_v) S += dt * tau * problem.potential_ext(zm)(0, 0);
        }
        CMat out(1, 1);
        out(0, 0) = std::exp(S);
        return out;
    }

    CMat W = CMat::Identity(m, m);
    CMat M(m, m);
    for (int i = 0; i < n; ++i) {
        const double tm = (i + 0.5) * dt;
        for (int j = 0; j < d; ++j) {
            dz[j] = st * (loop.u(i + 1, j) - loop.u(i, j)) + dt * (x[j] - y[j]);
            zm[j] = st * 0.5 * (loop.u(i + 1, j) + loop.u(i, j)) + y[j] + tm * (x[j] - y[j]);
        }
        M.setZero();
        if (has_b) {
            auto Bs = problem.connection_ext(zm);
            for (int j = 0; j < d; ++j) M -= dz[j] * Bs[j];
        }
        if (has_v) M += (dt * tau) * problem.potential_ext(zm);
        W = (M.exp() * W).eval();
    }
    return W;
}

double free_kernel(int d, const Vec& x, const Vec& y, double tau) {
    return std::exp(-(x - y).squaredNorm() / (4.0 * tau)) *
           std::pow(4.0 * M_PI * tau, -0.5 * d);
}

namespace {

struct BlockStats {
    CMat sum;
    Mat sumsq_re, sumsq_im;
    void init(int m) {
        sum = CMat::Zero(m, m);
        sumsq_re = Mat::Zero(m, m);
        sumsq_im = Mat::Zero(m, m);
    }
    void add(const CMat& v) {
        sum += v;
        sumsq_re += v.real().cwiseProduct(v.real());
        sumsq_im += v.imag().cwiseProduct(v.imag());
    }
};

constexpr long kBlock = 4096;

/// Deterministic parallel MC driver: per-path substreams, per-block partials,
/// sequential block reduction.
template <class PerPath>
MCEstimate mc_run(int d, int m, double prefactor, const Vec& x, const Vec& y, double tau,
                  const McParams& params, PerPath per_path) {
    const long n = params.n_paths;
    const long n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<BlockStats> blocks(n_blocks);
    parallel_for(
        n_blocks,
        [&](long b) {
            BlockStats& st = blocks[b];
            st.init(m);
            const long lo = b * kBlock;
            const long hi = std::min(n, lo + kBlock);
            for (long p = lo; p < hi; ++p) {
                RngStream rng(params.seed, static_cast<std::uint64_t>(p));
                st.add(per_path(rng));
            }
        },
        params.threads);

    CMat total = CMat::Zero(m, m);
    Mat sq_re = Mat::Zero(m, m), sq_im = Mat::Zero(m, m);
    for (const auto& b : blocks) {
        total += b.sum;
        sq_re += b.sumsq_re;
        sq_im += b.sumsq_im;
    }

    MCEstimate est;
    est.n_paths = n;
    est.n_steps = params.n_steps;
    est.seed = params.seed;
    est.tau = tau;
    est.x = x;
    est.y = y;
    CMat mean_v = total / static_cast<double>(n);
    est.mean = prefactor * mean_v;
    est.stderr_mat = Mat::Zero(m, m);
    if (n > 1) {
        Mat var_re =
            (sq_re / double(n) - mean_v.real().cwiseProduct(mean_v.real())) * (double(n) / (n - 1));
        Mat var_im =
            (sq_im / double(n) - mean_v.imag().cwiseProduct(mean_v.imag())) * (double(n) / (n - 1));
        Mat var = (var_re + var_im).cwiseMax(0.0);
        est.stderr_mat = std::abs(prefactor) * (var / double(n)).cwiseSqrt();
    }
    return est;
}

}  // namespace

MCEstimate kernel_mc(const FlatProblem& problem, const Vec& x, const Vec& y, double tau,
                     const McParams& params) {
    if (!(tau > 0.0)) throw ConfigError("kernel_mc: tau must be positive");
    const int d = problem.dim;
    const int m = problem.fiber_dim;
    const double pref = free_kernel(d, x, y, tau);
    return mc_run(d, m, pref, x, y, tau, params, [&](RngStream& rng) {
        BridgeLoop loop = sample_bridge(rng, d, params.n_steps);
        return ordered_exponential(loop, tau, x, y, problem);
    });
}

ScalingCheckResult scaling_check(const FlatProblem& problem, const Vec& x, const Vec& y,
                                 const Vec& z, double tau, const McParams& params) {
    if (!(tau > 0.0)) throw ConfigError("scaling_check: tau must be positive");
    const int d = problem.dim;
    const int m = problem.fiber_dim;
    const double st = std::sqrt(tau);

    FlatProblem scaled;
    scaled.dim = d;
    scaled.fiber_dim = m;
    scaled.name = problem.name + "-rescaled";
    if (problem.connection_ext) {
        auto base = problem.connection_ext;
        scaled.connection_ext = [base, st, z](const Vec& w) {
            auto Bs = base(st * w + z);
            for (auto& B : Bs) B *= st;
            return Bs;
        };
    }
    if (problem.potential_ext) {
        auto base = problem.potential_ext;
        scaled.potential_ext = [base, st, z, tau](const Vec& w) {
            return CMat(tau * base(st * w + z));
        };
    }
    Vec xs = (x - z) / st;
    Vec ys = (y - z) / st;

    const double pref_l = free_kernel(d, x, y, tau);
    const double pref_r = std::pow(tau, -0.5 * d) * free_kernel(d, xs, ys, 1.0);

    ScalingCheckResult res;
    res.lhs = mc_run(d, m, pref_l, x, y, tau, params, [&](RngStream& rng) {
        BridgeLoop loop = sample_bridge(rng, d, params.n_steps);
        return ordered_exponential(loop, tau, x, y, problem);
    });
    res.rhs = mc_run(d, m, pref_r, xs, ys, 1.0, params, [&](RngStream& rng) {
        BridgeLoop loop = sample_bridge(rng, d, params.n_steps);
        return ordered_exponential(loop, 1.0, xs, ys, scaled);
    });
    // coupled difference: same substreams -> same bridges on both sides
    MCEstimate diff = mc_run(d, m, 1.0, x, y, tau, params, [&](RngStream& rng) {
        BridgeLoop loop = sample_bridge(rng, d, params.n_steps);
        CMat l = pref_l * ordered_exponential(loop, tau, x, y, problem);
        CMat r = pref_r * ordered_exponential(loop, 1.0, xs, ys, scaled);
        return CMat(l - r);
    });
    res.coupled_diff = diff.mean.norm();
    res.coupled_stderr = diff.stderr_mat.norm();
    return res;
}

DiagonalScalingReport diagonal_scaling_check(const LaplaceProblem& problem, const Vec& x,
                                             double tau, int k_order, const SdwOptions& opt) {
    if (!(tau > 0.0)) throw ConfigError("diagonal_scaling_check: tau must be positive");
    const double st = std::sqrt(tau);
    const int d = problem.dim;

    LaplaceProblem scaled;
    scaled.dim = d;
    scaled.fiber_dim = problem.fiber_dim;
    scaled.name = problem.name + "-substituted";
    scaled.metric_inv = [d](const Vec&) { return Mat::Identity(d, d); };
    if (problem.connection) {
        auto base = problem.connection;
        scaled.connection = [base, st](const Vec& w) {
            auto Bs = base(w / st);
            for (auto& B : Bs) B /= st;
            return Bs;
        };
    }
    if (problem.potential) {
        auto base = problem.potential;
        scaled.potential = [base, st, tau](const Vec& w) { return CMat(base(w / st) / tau); };
    }
    Box b;
    b.lo = problem.chart_domain.lo * st;
    b.hi = problem.chart_domain.hi * st;
    scaled.chart_domain = b;

    DiagonalScalingReport rep;
    SdwEngine base_engine(problem, opt);
    SdwEngine scaled_engine(scaled, opt);
    rep.base = base_engine.diagonal(x, k_order);
    rep.substituted = scaled_engine.diagonal(st * x, k_order);
    rep.passed = true;
    for (int k = 0; k <= k_order; ++k) {
        double scalef = std::max(rep.base[k].norm(), 0.1);
        double err = (std::pow(tau, k) * rep.substituted[k] - rep.base[k]).norm() / scalef;
        rep.ratio_error.push_back(err);
        if (err > opt.recur_tol) rep.passed = false;
    }
    return rep;
}

BoundReport bound_check(const FlatProblem& problem, double c, const Vec& x, const Vec& y,
                        double tau, const McParams& params) {
    if (problem.fiber_dim != 1)
        throw ConfigError("bound_check: scalar potential required (fiber_dim 1)");
    if (problem.connection_ext)
        throw ConfigError("bound_check: connection must be absent");
    const int d = problem.dim;
    const int n = params.n_steps;
    const double dt = 1.0 / n;
    const double st = std::sqrt(tau);
    const double bound = std::exp(tau * c);

    struct PathStats {
        double sum = 0.0, sumsq = 0.0, maxf = 0.0;
        long violations = 0;
        bool sup_violated = false;
    };
    const long n_blocks = (params.n_paths + kBlock - 1) / kBlock;
    std::vector<PathStats> blocks(n_blocks);
    parallel_for(
        n_blocks,
        [&](long bidx) {
            PathStats& ps = blocks[bidx];
            const long lo = bidx * kBlock;
            const long hi = std::min(params.n_paths, lo + kBlock);
            Vec zm(d);
            for (long p = lo; p < hi; ++p) {
                RngStream rng(params.seed, static_cast<std::uint64_t>(p));
                BridgeLoop loop = sample_bridge(rng, d, n);
                double S = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double tm = (i + 0.5) * dt;
                    for (int j = 0; j < d; ++j)
                        zm[j] = st * 0.5 * (loop.u(i + 1, j) + loop.u(i, j)) + y[j] +
                                tm * (x[j] - y[j]);
                    const double v = problem.potential_at(zm)(0, 0).real();
                    if (v > c) {
                        ps.sup_violated = true;
                        return;
                    }
                    S += dt * v;
                }
                const double f = std::exp(tau * S);
                ps.sum += f;
                ps.sumsq += f * f;
                ps.maxf = std::max(ps.maxf, f);
                if (f > bound * (1.0 + 1e-12)) ++ps.violations;
            }
        },
        params.threads);

    BoundReport rep;
    rep.n_paths = params.n_paths;
    rep.bound = bound;
    double sum = 0.0, sumsq = 0.0;
    for (const auto& b : blocks) {
        if (b.sup_violated)
            throw SupremumViolated("bound_check: sampled potential above declared supremum");
        sum += b.sum;
        sumsq += b.sumsq;
        rep.max_functional = std::max(rep.max_functional, b.maxf);
        rep.violations += b.violations;
    }
    const double nn = static_cast<double>(params.n_paths);
    const double mean = sum / nn;
    const double var = std::max(0.0, (sumsq / nn - mean * mean) * nn / (nn - 1.0));
    const double pref = free_kernel(d, x, y, tau);
    rep.mc_mean = pref * mean;
    rep.mc_stderr = pref * std::sqrt(var / nn);
    rep.free_value = pref;
    rep.passed = rep.violations == 0 &&
                 rep.mc_mean <= pref * bound + 3.0 * rep.mc_stderr;
    return rep;
}

}  // namespace heatlab
