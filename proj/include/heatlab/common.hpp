#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "heatlab/errors.hpp"

namespace heatlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

/// Axis-aligned box in R^d, the declared validity region of a chart.
struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const Vec& x, double margin = 0.0) const {
        for (int i = 0; i < dim(); ++i) {
            if (x[i] < lo[i] + margin || x[i] > hi[i] - margin) return false;
        }
        return true;
    }

    double diameter() const { return (hi - lo).norm(); }
};

/// Scalar/matrix fields are plain callables of the chart coordinate.
using ScalarField = std::function<double(const Vec&)>;
using MetricField = std::function<Mat(const Vec&)>;       // x -> g^{mu nu}
using MatrixField = std::function<CMat(const Vec&)>;      // x -> m x m
using ConnectionField = std::function<std::vector<CMat>(const Vec&)>;  // x -> d matrices

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

inline Vec vec3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

/// Inverse + determinant for the small symmetric positive matrices that show
/// up in metric work. Closed forms for d <= 3 keep the hot path allocation-free.
void invert_spd(const Mat& a, Mat& inv, double& det);

/// Condition number estimate (ratio of extreme eigenvalues) for a symmetric matrix.
double sym_condition(const Mat& a);

}  // namespace heatlab
