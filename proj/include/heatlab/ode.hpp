#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "heatlab/common.hpp"

namespace heatlab::ode {

struct Options {
    double rtol = 1e-10;
    double atol = 1e-12;
    int max_steps = 200000;
    double h_init = 0.0;  // 0 = automatic
};

struct StepRecord {
    double t;
    Vec y;
};

/// Adaptive Dormand-Prince 5(4) integrator over a fixed-size state vector.
/// The RHS functor is called as rhs(t, y, dydt). advance_to() lands exactly on
/// the requested time by clamping the final step, so no dense-output
/// interpolation error enters observed states.
template <class RHS>
class Rk45 {
  public:
    Rk45(RHS rhs, int n, Options opt = {})
        : rhs_(rhs), opt_(opt), y_(n), k1_(n), k2_(n), k3_(n), k4_(n), k5_(n),
          k6_(n), k7_(n), ytmp_(n), y5_(n), yerr_(n) {}

    void init(double t0, const Vec& y0) {
        t_ = t0;
        y_ = y0;
        h_ = opt_.h_init;
        have_k1_ = false;
        steps_taken_ = 0;
    }

    double time() const { return t_; }
    const Vec& state() const { return y_; }

    /// Integrate from the current time to exactly t_target (forward only).
    void advance_to(double t_target, std::vector<StepRecord>* sink = nullptr) {
        if (t_target <= t_ + 1e-300) return;
        if (!have_k1_) {
            rhs_(t_, y_, k1_);
            have_k1_ = true;
            if (h_ <= 0.0) h_ = initial_step(t_target);
        }
        while (t_ < t_target) {
            if (++steps_taken_ > opt_.max_steps)
                throw NumericalError("ode: step limit exceeded");
            bool clipped = false;
            double h = h_;
            if (t_ + h >= t_target) {
                h = t_target - t_;
                clipped = true;
            }
            double err = attempt_step(h);
            if (err <= 1.0) {
                t_ = (clipped ? t_target : t_ + h);
                y_.swap(y5_);
                k1_.swap(k7_);  // FSAL
                if (sink) sink->push_back({t_, y_});
                double grow = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
                h_ = h * std::clamp(grow, 0.2, 5.0);
            } else {
                double shrink = std::max(0.9 * std::pow(err, -0.2), 0.2);
                h_ = h * shrink;
                if (h_ < 1e-14 * std::max(1.0, std::abs(t_)))
                    throw NumericalError("ode: step size underflow");
            }
        }
    }

  private:
    // Dormand-Prince tableau
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    double attempt_step(double h) {
        const double t = t_;
        ytmp_ = y_ + h * a21 * k1_;
        rhs_(t + h / 5, ytmp_, k2_);
        ytmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
        rhs_(t + 3 * h / 10, ytmp_, k3_);
        ytmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        rhs_(t + 4 * h / 5, ytmp_, k4_);
        ytmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        rhs_(t + 8 * h / 9, ytmp_, k5_);
        ytmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        rhs_(t + h, ytmp_, k6_);
        y5_ = y_ + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
        rhs_(t + h, y5_, k7_);
        yerr_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

        double err = 0.0;
        for (int i = 0; i < y_.size(); ++i) {
            double sc = opt_.atol + opt_.rtol * std::max(std::abs(y_[i]), std::abs(y5_[i]));
            double r = yerr_[i] / sc;
            err += r * r;
        }
        return std::sqrt(err / static_cast<double>(y_.size()));
    }

    double initial_step(double t_target) const {
        double d0 = y_.norm();
        double d1 = k1_.norm();
        double h0 = (d1 > 1e-10) ? 0.01 * std::max(d0, 1.0) / d1 : (t_target - t_);
        return std::min(h0, t_target - t_);
    }

    RHS rhs_;
    Options opt_;
    Vec y_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, y5_, yerr_;
    double t_ = 0.0;
    double h_ = 0.0;
    bool have_k1_ = false;
    int steps_taken_ = 0;
};

}  // namespace heatlab::ode
