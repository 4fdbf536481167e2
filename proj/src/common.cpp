#include "heatlab/common.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace heatlab {

void invert_spd(const Mat& a, Mat& inv, double& det) {
    const int d = static_cast<int>(a.rows());
    switch (d) {
        case 1: {
            det = a(0, 0);
            if (!(std::abs(det) > 1e-300) || !std::isfinite(det))
                throw SingularMetric("singular 1x1 metric");
            inv.resize(1, 1);
            inv(0, 0) = 1.0 / det;
            return;
        }
        case 2: {
            det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
            if (!(std::abs(det) > 1e-300) || !std::isfinite(det))
                throw SingularMetric("singular 2x2 metric");
            inv.resize(2, 2);
            const double r = 1.0 / det;
            inv(0, 0) = a(1, 1) * r;
            inv(1, 1) = a(0, 0) * r;
            inv(0, 1) = -a(0, 1) * r;
            inv(1, 0) = -a(1, 0) * r;
            return;
        }
        case 3: {
            const double c00 = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
            const double c01 = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
            const double c02 = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
            det = a(0, 0) * c00 + a(0, 1) * c01 + a(0, 2) * c02;
            if (!(std::abs(det) > 1e-300) || !std::isfinite(det))
                throw SingularMetric("singular 3x3 metric");
            inv.resize(3, 3);
            const double r = 1.0 / det;
            inv(0, 0) = c00 * r;
            inv(1, 0) = c01 * r;
            inv(2, 0) = c02 * r;
            inv(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) * r;
            inv(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) * r;
            inv(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) * r;
            inv(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) * r;
            inv(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) * r;
            inv(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) * r;
            return;
        }
        default: {
            Eigen::LLT<Mat> llt(a);
            if (llt.info() != Eigen::Success) throw SingularMetric("metric not SPD");
            inv = llt.solve(Mat::Identity(d, d));
            det = 1.0;
            const Mat& L = llt.matrixLLT();
            for (int i = 0; i < d; ++i) det *= L(i, i) * L(i, i);
            return;
        }
    }
}

double sym_condition(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    double lo = ev.minCoeff(), hi = ev.maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace heatlab
