#include "heatlab/psi.hpp"

#include <cmath>

#include "heatlab/quadrature.hpp"

namespace heatlab {

double rgamma_int(int j) {
    if (j <= 0) return 0.0;
    if (j <= 21) {
        double fact = 1.0;
        for (int i = 2; i < j; ++i) fact *= i;
        return 1.0 / fact;
    }
    return std::exp(-std::lgamma(static_cast<double>(j)));
}

double binomial_partial_sum(double k, double s, double tau, int N) {
    if (!(tau > 0.0)) throw ConfigError("binomial_partial_sum: tau must be positive");
    if (!(std::abs(s / tau) < 1.0))
        throw ConfigError("binomial_partial_sum: requires |s/tau| < 1");
    const double q = -s / tau;
    double term = 1.0;  // (k)_0 q^0 / 0!
    double sum = term;
    for (int n = 1; n <= N; ++n) {
        term *= (k + n - 1) * q / n;
        sum += term;
    }
    return std::pow(tau, -k) * sum;
}

PsiEngine::PsiEngine(const LaplaceProblem& problem,
                     std::shared_ptr<CoefficientSource> source, PsiOptions opt)
    : problem_(problem), source_(std::move(source)), opt_(opt),
      stencil_engine_(problem_, opt_.sdw) {
    if (!source_) throw ConfigError("PsiEngine: coefficient source required");
    if (source_->fiber_dim() != problem_.fiber_dim)
        throw ConfigError("PsiEngine: source fiber dimension mismatch");
}

PsiEngine::GeoData PsiEngine::geo(const Vec& x, const Vec& y) {
    GeoData g;
    std::string key;
    key.reserve(2 * sizeof(long long) * problem_.dim);
    for (const Vec* v : {&x, &y})
        for (int i = 0; i < v->size(); ++i) {
            long long q = llround((*v)[i] * 1e12);
            key.append(reinterpret_cast<const char*>(&q), sizeof q);
        }
    if (auto hit = memo_sigma_.find(key)) {
        g.sigma = *hit;
    } else {
        g.sigma = memo_sigma_.insert(
            key, world_function(problem_, x, y, opt_.sdw.synge).sigma);
    }
    g.delta_sqrt = stencil_engine_.delta_sqrt(x, y);
    return g;
}

PsiValue PsiEngine::psi(int k, const Vec& x, const Vec& y, int N) {
    PsiValue out;
    out.k = k;
    out.x = x;
    out.y = y;
    out.truncation = N;
    const int m = problem_.fiber_dim;

    if ((x - y).norm() < opt_.sdw.synge.coincidence_eps) {
        // sigma = 0: only the n = k term survives for k >= 0 (0^0 = 1);
        // every term carries a positive power of sigma for k < 0.
        out.value = (k >= 0 && k <= N) ? CMat(source_->a(k, x, y)) : CMat::Zero(m, m);
        out.tail_estimate = 0.0;
        return out;
    }

    const GeoData g = geo(x, y);
    const double w = -0.5 * g.sigma;
    CMat sum = CMat::Zero(m, m);
    double last_norm = 0.0;
    // Terms with n < k vanish identically (reciprocal Gamma at non-positive
    // integers); the loop never touches them.
    for (int n = std::max(0, k); n <= N; ++n) {
        const double weight = std::pow(w, n - k) * rgamma_int(n - k + 1);
        CMat term = weight * source_->a(n, x, y);
        sum += term;
        last_norm = term.norm();
    }
    out.value = g.delta_sqrt * sum;
    out.tail_estimate = g.delta_sqrt * last_norm;
    out.truncation_warning = out.tail_estimate > opt_.trunc_warn_ratio * out.value.norm();
    return out;
}

CMat PsiEngine::psi_windowed(int k, const Vec& x, const Vec& y, int n_max, int j_max) {
    const int m = problem_.fiber_dim;
    const int n_lo = std::max(0, k);
    const int n_hi = std::min(n_max, k + j_max);
    if ((x - y).norm() < opt_.sdw.synge.coincidence_eps) {
        if (k >= 0 && k >= n_lo && k <= n_hi) return source_->a(k, x, y);
        return CMat::Zero(m, m);
    }
    const GeoData g = geo(x, y);
    const double w = -0.5 * g.sigma;
    CMat sum = CMat::Zero(m, m);
    for (int n = n_lo; n <= n_hi; ++n)
        sum += (std::pow(w, n - k) * rgamma_int(n - k + 1)) * source_->a(n, x, y);
    return CMat(g.delta_sqrt * sum);
}

double PsiEngine::check_psi_recursion(int k, const Vec& x, const Vec& y, int N) {
    MatrixField field = [this, k, &y, N](const Vec& z) -> CMat {
        return psi(k, z, y, N).value;
    };
    const double stencil = stencil_engine_.stencil_for(x, y);
    CMat lhs = stencil_engine_.apply_A(field, x, stencil);
    CMat rhs = (0.5 * problem_.dim - 1.0 - k) * psi(k + 1, x, y, N).value;
    return (lhs - rhs).norm();
}

CMat PsiEngine::kernel_from_psi(const Vec& x, const Vec& y, double tau, int k_min,
                                int k_max) {
    if (!(tau > 0.0)) throw ConfigError("kernel_from_psi: tau must be positive");
    if (k_min > 0 || k_max < 0)
        throw ConfigError("kernel_from_psi: window must contain k = 0");
    const int d = problem_.dim;
    const double pref = std::pow(4.0 * M_PI * tau, -0.5 * d);
    CMat sum = CMat::Zero(problem_.fiber_dim, problem_.fiber_dim);
    for (int k = k_min; k <= k_max; ++k)
        sum += std::pow(tau, k) * psi_windowed(k, x, y, k_max, -k_min);
    return CMat(pref * sum);
}

CMat PsiEngine::kernel_direct(const Vec& x, const Vec& y, double tau, int k_min,
                              int k_max) {
    if (!(tau > 0.0)) throw ConfigError("kernel_direct: tau must be positive");
    if (k_min > 0 || k_max < 0)
        throw ConfigError("kernel_direct: window must contain k = 0");
    const int d = problem_.dim;
    const int m = problem_.fiber_dim;
    const double pref = std::pow(4.0 * M_PI * tau, -0.5 * d);
    double sigma = 0.0;
    double dsqrt = 1.0;
    if ((x - y).norm() >= opt_.sdw.synge.coincidence_eps) {
        const GeoData g = geo(x, y);
        sigma = g.sigma;
        dsqrt = g.delta_sqrt;
    }
    double expo = 0.0;
    double term = 1.0;
    for (int j = 0; j <= -k_min; ++j) {
        expo += term;
        term *= -0.5 * sigma / tau / (j + 1);
    }
    CMat series = CMat::Zero(m, m);
    double tp = 1.0;
    for (int n = 0; n <= k_max; ++n) {
        series += tp * source_->a(n, x, y);
        tp *= tau;
    }
    return CMat(pref * dsqrt * expo * series);
}

std::pair<CMat, CMat> PsiEngine::kernel_split(const Vec& x, const Vec& y, double tau,
                                              int N) {
    const int d = problem_.dim;
    if (d % 2 != 0) throw OddDimension("kernel_split: defined for even dimension only");
    if (!(tau > 0.0)) throw ConfigError("kernel_split: tau must be positive");
    const int half = d / 2;
    const int lo = half - 1 - N;
    const int hi = half + N;
    if (lo > 0) throw ConfigError("kernel_split: N too small for this dimension");
    const double pref = std::pow(4.0 * M_PI * tau, -0.5 * d);
    const int m = problem_.fiber_dim;
    CMat k_minus = CMat::Zero(m, m), k_plus = CMat::Zero(m, m);
    for (int k = lo; k <= hi; ++k) {
        CMat term = std::pow(tau, k) * psi_windowed(k, x, y, hi, -lo);
        if (k < half)
            k_minus += term;
        else
            k_plus += term;
    }
    return {CMat(pref * k_minus), CMat(pref * k_plus)};
}

namespace {
double falling_factorial(double p, int r) {
    double f = 1.0;
    for (int i = 0; i < r; ++i) f *= (p - i);
    return f;
}
}  // namespace

double PsiEngine::shift_check(const Vec& x, const Vec& y, double tau, double s,
                              int n_taylor, int k_min, int k_max) {
    if (!(tau > 0.0 && tau + s > 0.0))
        throw ConfigError("shift_check: need tau > 0 and tau + s > 0");
    if (!(std::abs(s) < tau)) throw ConfigError("shift_check: need |s| < tau");
    const int d = problem_.dim;
    const int m = problem_.fiber_dim;
    const double pref4pi = std::pow(4.0 * M_PI, -0.5 * d);

    std::vector<CMat> coef;
    coef.reserve(k_max - k_min + 1);
    for (int k = k_min; k <= k_max; ++k)
        coef.push_back(CMat(pref4pi * psi_windowed(k, x, y, k_max, -k_min)));

    auto eval_at = [&](double t) {
        CMat sum = CMat::Zero(m, m);
        for (int k = k_min; k <= k_max; ++k)
            sum += std::pow(t, k - 0.5 * d) * coef[k - k_min];
        return sum;
    };

    CMat lhs = eval_at(tau + s);

    CMat rhs = CMat::Zero(m, m);
    double sr = 1.0;  // s^r / r!
    for (int r = 0; r <= n_taylor; ++r) {
        CMat dr = CMat::Zero(m, m);
        for (int k = k_min; k <= k_max; ++k) {
            const double p = k - 0.5 * d;
            dr += (falling_factorial(p, r) * std::pow(tau, p - r)) * coef[k - k_min];
        }
        rhs += sr * dr;
        sr *= s / (r + 1);
    }
    return (lhs - rhs).norm();
}

double PsiEngine::delta_regularization_check(const Vec& x, double eps,
                                             const ScalarField& phi, double half_width,
                                             int k_min) {
    if (!(eps > 0.0)) throw ConfigError("delta_regularization_check: eps must be positive");
    const int d = problem_.dim;
    const int m = problem_.fiber_dim;
    // Keep the exponential-series argument sigma / 2 eps below ~10 so the
    // truncated sum stays numerically trustworthy; the discarded Gaussian
    // tail mass is ~1e-5.
    const double w = std::min(half_width, std::sqrt(40.0 * eps));

    quad::Options qopt;
    qopt.abs_tol = 1e-10;
    qopt.rel_tol = 1e-8;

    std::function<CMat(Vec&, int)> integrate_axis = [&](Vec& z, int axis) -> CMat {
        auto f = [&](double t) -> CMat {
            z[axis] = x[axis] + t;
            if (axis + 1 < d) return integrate_axis(z, axis + 1);
            Mat g_lower;
            double det_inv;
            invert_spd(problem_.metric_inv(z), g_lower, det_inv);
            const double sqrt_g = std::sqrt(1.0 / det_inv);
            CMat K = kernel_from_psi(x, z, eps, k_min, 2);
            return CMat(sqrt_g * phi(z) * K);
        };
        return quad::integrate(f, -w, w, qopt);
    };
    Vec z = x;
    CMat result = integrate_axis(z, 0);
    return (result - phi(x) * CMat::Identity(m, m)).norm();
}

}  // namespace heatlab
