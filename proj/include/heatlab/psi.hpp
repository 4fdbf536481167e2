#pragma once

#include <memory>
#include <utility>

#include "heatlab/sdw.hpp"

namespace heatlab {

/// One evaluation of the Psi family: truncated series value, the order of the
/// last included term, and a tail magnitude for the asymptotic-regime guard.
struct PsiValue {
    int k = 0;
    Vec x, y;
    int truncation = 0;
    CMat value;
    double tail_estimate = 0.0;
    bool truncation_warning = false;
};

struct PsiOptions {
    double trunc_warn_ratio = 1e-3;
    double quad_abs_tol = 1e-10;
    double quad_rel_tol = 1e-10;
    // Psi checks differentiate smooth closed-form-backed fields just once, so
    // a finer stencil than the transport default pays off in truncation.
    SdwOptions sdw = [] {
        SdwOptions o;
        o.stencil_width = 5e-3;
        return o;
    }();
};

/// Exact reciprocal of Gamma at integer arguments: zero for j <= 0, 1/(j-1)!
/// otherwise. The series below must skip vanishing terms exactly, so this
/// never approximates 1/Gamma near a pole.
double rgamma_int(int j);

/// tau^{-k} * sum_{n=0}^{N} (k)_n (-s/tau)^n / n!  ->  (tau+s)^{-k}.
/// Pochhammer products keep k <= 0 exact (terms vanish identically).
double binomial_partial_sum(double k, double s, double tau, int N);

/// Psi_k evaluation and the kernel rearrangements built on one coefficient
/// source plus the geometry of the underlying problem.
class PsiEngine {
  public:
    PsiEngine(const LaplaceProblem& problem, std::shared_ptr<CoefficientSource> source,
              PsiOptions opt = {});

    /// Partial sum of the defining series over n = max(0, k) .. N.
    PsiValue psi(int k, const Vec& x, const Vec& y, int N);

    /// || A Psi_k - (d/2 - 1 - k) Psi_{k+1} ||_F with A applied by finite
    /// differences in x.
    double check_psi_recursion(int k, const Vec& x, const Vec& y, int N);

    /// (4 pi tau)^{-d/2} sum_{k in [k_min, k_max]} tau^k Psi_k, with each
    /// Psi_k truncated so the double sum equals the rectangle
    /// {0 <= n <= k_max, 0 <= j <= -k_min} of the direct expansion
    /// (j = n - k); requires k_min <= 0 <= k_max.
    CMat kernel_from_psi(const Vec& x, const Vec& y, double tau, int k_min, int k_max);

    /// Direct truncated expansion over the same rectangle: prefactor times
    /// (sum_j (-sigma/2tau)^j / j!) * (sum_n tau^n a_n).
    CMat kernel_direct(const Vec& x, const Vec& y, double tau, int k_min, int k_max);

    /// Even-d split: K_- collects k < d/2, K_+ collects k >= d/2 of the
    /// kernel_from_psi window [d/2-1-N, d/2+N].
    std::pair<CMat, CMat> kernel_split(const Vec& x, const Vec& y, double tau, int N);

    /// Frobenius distance between kernel_from_psi at tau+s and the
    /// N_taylor-term Taylor translation e^{s d_tau} of the sum at tau.
    double shift_check(const Vec& x, const Vec& y, double tau, double s, int n_taylor,
                       int k_min = -12, int k_max = 4);

    /// | integral sqrt(g) K(x, z; eps) phi(z) dz - phi(x) | over the box
    /// [x - half_width, x + half_width]^d (window shrunk to where the
    /// truncated series is trustworthy).
    double delta_regularization_check(const Vec& x, double eps, const ScalarField& phi,
                                      double half_width, int k_min = -30);

    const LaplaceProblem& problem() const { return problem_; }

  private:
    struct GeoData {
        double sigma;
        double delta_sqrt;
    };
    GeoData geo(const Vec& x, const Vec& y);
    CMat psi_windowed(int k, const Vec& x, const Vec& y, int n_max, int j_max);

    const LaplaceProblem& problem_;
    std::shared_ptr<CoefficientSource> source_;
    PsiOptions opt_;
    SdwEngine stencil_engine_;  // for apply_A and Delta^{1/2}
    ConcurrentMemo<double> memo_sigma_;
};

}  // namespace heatlab
