#pragma once

// Test-side oracles, kept independent of the library's computation paths.

#include <cmath>
#include <vector>

namespace test_oracles {

/// Exact kernel of A = -d^2/dx^2 + omega^2 x^2 in extended precision.
inline long double mehler_kernel_l(long double omega, long double x, long double y,
                                   long double tau) {
    if (omega < 1e-14L)
        return std::exp(-(x - y) * (x - y) / (4.0L * tau)) /
               std::sqrt(4.0L * M_PIl * tau);
    const long double s = std::sinh(2.0L * omega * tau);
    const long double c = std::cosh(2.0L * omega * tau);
    return std::sqrt(omega / (2.0L * M_PIl * s)) *
           std::exp(-omega * ((x * x + y * y) * c - 2.0L * x * y) / (2.0L * s));
}

/// Short-time coefficients of the Mehler kernel: solves a small Vandermonde
/// system for F(tau) = sqrt(4 pi tau) e^{sigma/2tau} K(x,y;tau) = sum a_k tau^k
/// on a geometric tau grid. Extraction error is O(tau0^{n_fit - k}).
inline std::vector<double> mehler_taylor(double omega, double x, double y, int order,
                                         double tau0 = 0.02) {
    const int n = order + 4;  // fit a few orders beyond the requested one
    std::vector<long double> taus(n), rhs(n);
    std::vector<std::vector<long double>> V(n, std::vector<long double>(n));
    const long double sig = 0.5L * (static_cast<long double>(x) - y) * (static_cast<long double>(x) - y);
    for (int j = 0; j < n; ++j) {
        long double t = tau0 * (j + 1) / n;
        taus[j] = t;
        rhs[j] = std::sqrt(4.0L * M_PIl * t) * std::exp(sig / (2.0L * t)) *
                 mehler_kernel_l(omega, x, y, t);
        long double p = 1.0L;
        for (int k = 0; k < n; ++k) {
            V[j][k] = p;
            p *= t;
        }
    }
    // Gaussian elimination with partial pivoting, long double
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(V[r][col]) > std::fabs(V[piv][col])) piv = r;
        std::swap(V[piv], V[col]);
        std::swap(rhs[piv], rhs[col]);
        for (int r = col + 1; r < n; ++r) {
            long double f = V[r][col] / V[col][col];
            for (int k = col; k < n; ++k) V[r][k] -= f * V[col][k];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<long double> coef(n);
    for (int r = n - 1; r >= 0; --r) {
        long double s = rhs[r];
        for (int k = r + 1; k < n; ++k) s -= V[r][k] * coef[k];
        coef[r] = s / V[r][r];
    }
    std::vector<double> out(order + 1);
    for (int k = 0; k <= order; ++k) out[k] = static_cast<double>(coef[k]);
    return out;
}

/// Average of v(z) = -omega^2 z^2 along the segment y -> x: the first
/// transport coefficient for a flat scalar problem.
inline double harmonic_a1_line_average(double omega, double x, double y) {
    return -omega * omega * (x * x + x * y + y * y) / 3.0;
}

/// Gaussian bump convolved with the flat heat kernel of variance 2 eps.
inline double gaussian_convolution(double amp, double mu, double w2, double x,
                                   double eps) {
    const double v = w2 + 2.0 * eps;
    return amp * std::sqrt(w2 / v) * std::exp(-(x - mu) * (x - mu) / (2.0 * v));
}

}  // namespace test_oracles
