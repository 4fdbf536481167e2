#include "heatlab/synge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace heatlab {

namespace {

// sigma with the variational endpoint correction: the shooting solve lands at
// gamma(1) = x + miss; E/2 is sigma at the landed pair, and the first-order
// transport term sigma_mu * (x - gamma(1)) removes the O(miss) error.
double sigma_corrected(const LaplaceProblem& problem, const Geodesic& geo, const Vec& x) {
    const Vec& end_pos = geo.knots.back().pos;
    const Vec& end_vel = geo.knots.back().vel;
    Mat g_lower;
    double det;
    invert_spd(problem.metric_inv(end_pos), g_lower, det);
    Vec sigma_lower = g_lower * end_vel;
    return 0.5 * geo.energy + sigma_lower.dot(x - end_pos);
}

}  // namespace

SyngeData world_function(const LaplaceProblem& problem, const Vec& x, const Vec& y,
                         const SyngeOptions& opt) {
    const int d = problem.dim;
    SyngeData out;
    out.x = x;
    out.y = y;
    if ((x - y).norm() < opt.coincidence_eps) {
        out.sigma = 0.0;
        out.sigma_lower = Vec::Zero(d);
        out.sigma_upper = Vec::Zero(d);
        out.vanvleck = 1.0;
        return out;
    }
    Geodesic geo = geodesic_bvp(problem, y, x, opt.geom);
    out.sigma = sigma_corrected(problem, geo, x);
    out.sigma_upper = geo.knots.back().vel;
    Mat g_lower;
    double det;
    invert_spd(problem.metric_inv(x), g_lower, det);
    out.sigma_lower = g_lower * out.sigma_upper;
    return out;
}

double van_vleck(const LaplaceProblem& problem, const Vec& x, const Vec& y,
                 const SyngeOptions& opt) {
    const int d = problem.dim;
    if ((x - y).norm() < opt.coincidence_eps) return 1.0;

    SyngeOptions probe_opt = opt;
    probe_opt.geom.ode_tol = std::min(opt.geom.ode_tol, opt.vv_ode_tol);

    // Shrink the displacement step if the pair sits close to the chart boundary.
    double margin = std::numeric_limits<double>::infinity();
    const Box& box = problem.chart_domain;
    for (int i = 0; i < d; ++i) {
        for (const Vec* pt : {&x, &y}) {
            margin = std::min(margin, (*pt)[i] - box.lo[i]);
            margin = std::min(margin, box.hi[i] - (*pt)[i]);
        }
    }
    const double h = std::max(std::min(opt.vv_step, 0.45 * margin), opt.vv_step_min);

    // Warm start all displaced solves from the central velocity.
    Geodesic center = geodesic_bvp(problem, y, x, probe_opt.geom);

    // Column nu of -d^2 sigma / dx dy from central differences of the sigma
    // gradient at x (returned by world_function) over y-displacements.
    Mat g_lower_x;
    double det_x;
    invert_spd(problem.metric_inv(x), g_lower_x, det_x);
    auto grad_at = [&](const Vec& yy) -> Vec {
        Vec hint = center.v0 - (yy - y);
        Geodesic geo = geodesic_bvp(problem, yy, x, probe_opt.geom, &hint);
        return g_lower_x * geo.knots.back().vel;
    };

    auto mixed = [&](double step) {
        Mat M(d, d);
        for (int nu = 0; nu < d; ++nu) {
            Vec yp = y, ym = y;
            yp[nu] += step;
            ym[nu] -= step;
            M.col(nu) = -(grad_at(yp) - grad_at(ym)) / (2.0 * step);
        }
        return M;
    };

    Mat M = (4.0 * mixed(0.5 * h) - mixed(h)) / 3.0;  // one Richardson step

    double det_m = (d == 1) ? M(0, 0) : M.determinant();
    Mat tmp;
    double det_inv_x, det_inv_y;
    invert_spd(problem.metric_inv(x), tmp, det_inv_x);
    invert_spd(problem.metric_inv(y), tmp, det_inv_y);
    const double gx = 1.0 / det_inv_x;
    const double gy = 1.0 / det_inv_y;
    const double delta = det_m / std::sqrt(gx * gy);
    if (!(delta > 0.0))
        throw NegativeDeterminant("van_vleck: determinant not positive (left the normal "
                                  "neighborhood?)");
    return delta;
}

SyngeData synge_full(const LaplaceProblem& problem, const Vec& x, const Vec& y,
                     const SyngeOptions& opt) {
    SyngeData out = world_function(problem, x, y, opt);
    if ((x - y).norm() >= opt.coincidence_eps) out.vanvleck = van_vleck(problem, x, y, opt);
    return out;
}

}  // namespace heatlab
