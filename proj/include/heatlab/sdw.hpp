#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "heatlab/synge.hpp"

namespace heatlab {

struct SdwOptions {
    int k_max = 3;
    // Stencil width for apply_A. Fixed per transport solve rather than scaled
    // by |x - y|: the width balances fd truncation (field length scale)
    // against roundoff amplified by 1/width^2 through the nested differences;
    // pair separation plays no role in either. Shrunk near chart boundaries.
    double stencil_width = 3e-2;
    double stencil_min = 1e-4;
    double stencil_max = 5e-2;
    long max_evals = 1000000;     // budget on transport-node evaluations
    double quad_abs_tol = 3e-8;
    double quad_rel_tol = 1e-8;
    double recur_tol = 1e-4;
    double diag_eps0 = 3e-3;      // base displacement for diagonal extrapolation
    SyngeOptions synge;
};

struct SdwTable {
    Vec x, y;
    int order = 0;
    std::vector<CMat> coeffs;  // a_0 .. a_order
    double stencil_width = 0.0;
    double transport_tol = 0.0;
};

/// First-wins concurrent map with per-shard locking. Values are results of
/// pure computations, so whichever insertion lands first is value-identical
/// to any competitor.
template <class V>
class ConcurrentMemo {
  public:
    std::optional<V> find(const std::string& key) const {
        const Shard& s = shard(key);
        std::lock_guard<std::mutex> lk(s.mu);
        auto it = s.map.find(key);
        if (it == s.map.end()) return std::nullopt;
        return it->second;
    }

    V insert(const std::string& key, V value) {
        Shard& s = shard(key);
        std::lock_guard<std::mutex> lk(s.mu);
        auto [it, fresh] = s.map.emplace(key, std::move(value));
        (void)fresh;
        return it->second;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& s : shards_) {
            std::lock_guard<std::mutex> lk(s.mu);
            n += s.map.size();
        }
        return n;
    }

  private:
    struct Shard {
        mutable std::mutex mu;
        std::unordered_map<std::string, V> map;
    };
    static constexpr std::size_t kShards = 16;
    Shard& shard(const std::string& key) {
        return shards_[std::hash<std::string>{}(key) % kShards];
    }
    const Shard& shard(const std::string& key) const {
        return shards_[std::hash<std::string>{}(key) % kShards];
    }
    mutable std::array<Shard, kShards> shards_;
};

/// Off-diagonal Seeley-DeWitt coefficients by integrating the transport
/// recurrence along the geodesic from y. The operand field of order k is
/// rebuilt recursively at stencil-displaced endpoints, memoized on quantized
/// coordinates. Safe for concurrent use; results are value-identical
/// regardless of scheduling.
class SdwEngine {
  public:
    explicit SdwEngine(const LaplaceProblem& problem, SdwOptions opt = {});

    /// a_k(x, y); a_0 is the Wilson line of the y -> x geodesic.
    CMat a(int k, const Vec& x, const Vec& y);

    SdwTable coefficients(const Vec& x, const Vec& y, int order);

    /// Diagonal values a_k(x, x) by Richardson extrapolation of two
    /// displaced-endpoint evaluations (eps0 and eps0/2).
    std::vector<CMat> diagonal(const Vec& x, int order);

    /// Apply the operator to a matrix field at x via nested second-order
    /// central differences of step `stencil`; the coefficient fields are
    /// evaluated exactly at the stencil nodes.
    CMat apply_A(const MatrixField& f, const Vec& x, double stencil) const;

    /// Norm of (k + sigma^mu D_mu) a_k + Delta^{-1/2} A Delta^{1/2} a_{k-1}
    /// at gamma(lambda) on the y -> x geodesic (k >= 1).
    double recurrence_residual(const Vec& x, const Vec& y, int k, double lambda);

    /// Memoized Delta^{1/2}(x, y).
    double delta_sqrt(const Vec& x, const Vec& y);

    long evals() const { return evals_.load(); }
    const LaplaceProblem& problem() const { return problem_; }
    const SdwOptions& options() const { return opt_; }
    double stencil_for(const Vec& x, const Vec& y) const;

  private:
    struct CallBudget {
        std::atomic<long> used{0};
        long cap = 0;
    };
    CMat a_impl(int k, const Vec& x, const Vec& y, double stencil, CallBudget& budget);
    CMat compute_a(int k, const Vec& x, const Vec& y, double stencil, CallBudget& budget);
    CMat transport_rhs(int k, const Vec& z, const Vec& y, double stencil,
                       CallBudget& budget);
    std::string pair_key(int k, const Vec& x, const Vec& y, double stencil) const;

    const LaplaceProblem& problem_;
    SdwOptions opt_;
    ConcurrentMemo<CMat> memo_a_;
    ConcurrentMemo<double> memo_vv_;
    std::atomic<long> evals_{0};
};

/// Source of coefficients for consumers (the Psi family) that need orders
/// beyond what the recursive transport engine can afford.
class CoefficientSource {
  public:
    virtual ~CoefficientSource() = default;
    virtual CMat a(int n, const Vec& x, const Vec& y) = 0;
    virtual int fiber_dim() const = 0;
};

/// Adapter over the transport engine.
class TransportSource : public CoefficientSource {
  public:
    explicit TransportSource(SdwEngine& engine) : engine_(engine) {}
    CMat a(int n, const Vec& x, const Vec& y) override { return engine_.a(n, x, y); }
    int fiber_dim() const override { return engine_.problem().fiber_dim; }

  private:
    SdwEngine& engine_;
};

/// Closed form for flat metric, constant Abelian connection xi_mu * I and
/// constant potential c * I:  a_n(x, y) = exp(-(x-y).xi) c^n / n! * I.
class ConstantPotentialSource : public CoefficientSource {
  public:
    ConstantPotentialSource(int dim, int fiber_dim, Complex c,
                            Eigen::VectorXcd xi = Eigen::VectorXcd());
    CMat a(int n, const Vec& x, const Vec& y) override;
    int fiber_dim() const override { return m_; }

  private:
    int d_, m_;
    Complex c_;
    Eigen::VectorXcd xi_;
};

}  // namespace heatlab
