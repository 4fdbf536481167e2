#include "heatlab/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "heatlab/ode.hpp"

namespace heatlab {

namespace {

std::string point_str(const Vec& x) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << ")";
    return os.str();
}

// Scratch space for repeated Christoffel evaluations along a trajectory.
struct ChristoffelScratch {
    Mat g_tmp, inv_tmp;
    std::vector<Mat> dg;      // dg[axis](rho, nu) = d_axis g_{rho nu}
    Mat g_inv_x;
    Vec xp;
    std::vector<Mat> gamma;   // gamma[lam](mu, nu)

    void resize(int d) {
        dg.assign(d, Mat(d, d));
        gamma.assign(d, Mat(d, d));
        xp.resize(d);
    }
};

void lower_metric_at(const LaplaceProblem& problem, const Vec& x, ChristoffelScratch& ws,
                     Mat& out) {
    ws.g_tmp = problem.metric_inv(x);
    double det;
    invert_spd(ws.g_tmp, out, det);
}

// Gamma^lam_{mu nu} with metric derivatives by central differences of step h
// and one Richardson refinement (h and h/2 stencils combined to 4th order).
void christoffel_into(const LaplaceProblem& problem, const Vec& x, double h,
                      ChristoffelScratch& ws) {
    const int d = problem.dim;
    if (!problem.chart_domain.contains(x, h))
        throw OutOfChart("christoffel: stencil leaves chart at " + point_str(x));

    Mat gp(d, d), gm(d, d), gph(d, d), gmh(d, d);
    for (int a = 0; a < d; ++a) {
        ws.xp = x;
        ws.xp[a] = x[a] + h;
        lower_metric_at(problem, ws.xp, ws, gp);
        ws.xp[a] = x[a] - h;
        lower_metric_at(problem, ws.xp, ws, gm);
        ws.xp[a] = x[a] + 0.5 * h;
        lower_metric_at(problem, ws.xp, ws, gph);
        ws.xp[a] = x[a] - 0.5 * h;
        lower_metric_at(problem, ws.xp, ws, gmh);
        // Richardson: (4 D(h/2) - D(h)) / 3
        ws.dg[a] = (4.0 * (gph - gmh) / h - (gp - gm) / (2.0 * h)) / 3.0;
    }

    ws.g_inv_x = problem.metric_inv(x);
    for (int lam = 0; lam < d; ++lam) {
        for (int mu = 0; mu < d; ++mu) {
            for (int nu = mu; nu < d; ++nu) {
                double s = 0.0;
                for (int rho = 0; rho < d; ++rho) {
                    s += ws.g_inv_x(lam, rho) *
                         (ws.dg[mu](rho, nu) + ws.dg[nu](rho, mu) - ws.dg[rho](mu, nu));
                }
                ws.gamma[lam](mu, nu) = 0.5 * s;
                ws.gamma[lam](nu, mu) = 0.5 * s;
            }
        }
    }
}

double fd_step_for(const LaplaceProblem& problem, const GeomOptions& opt) {
    return opt.fd_step_scale * problem.chart_domain.diameter();
}

// RHS of the geodesic equation, state = [q(d), v(d)].
struct GeodesicRhs {
    const LaplaceProblem& problem;
    double h;
    mutable ChristoffelScratch ws;

    GeodesicRhs(const LaplaceProblem& p, double step) : problem(p), h(step) {
        ws.resize(p.dim);
    }

    void operator()(double, const Vec& y, Vec& dy) const {
        const int d = problem.dim;
        const auto q = y.head(d);
        const auto v = y.segment(d, d);
        christoffel_into(problem, q, h, ws);
        dy.head(d) = v;
        for (int lam = 0; lam < d; ++lam) {
            double acc = 0.0;
            for (int mu = 0; mu < d; ++mu)
                for (int nu = 0; nu < d; ++nu) acc += ws.gamma[lam](mu, nu) * v[mu] * v[nu];
            dy[d + lam] = -acc;
        }
    }
};

// Joint RHS for (q, v, W): state = [q, v, Re W (col-major), Im W].
struct JointRhs {
    const LaplaceProblem& problem;
    double h;
    mutable ChristoffelScratch ws;
    mutable CMat W, M, dW;

    JointRhs(const LaplaceProblem& p, double step) : problem(p), h(step) {
        ws.resize(p.dim);
        const int m = p.fiber_dim;
        W.resize(m, m);
        M.resize(m, m);
        dW.resize(m, m);
    }

    void operator()(double, const Vec& y, Vec& dy) const {
        const int d = problem.dim;
        const int m = problem.fiber_dim;
        const auto q = y.head(d);
        const auto v = y.segment(d, d);
        christoffel_into(problem, q, h, ws);
        dy.head(d) = v;
        for (int lam = 0; lam < d; ++lam) {
            double acc = 0.0;
            for (int mu = 0; mu < d; ++mu)
                for (int nu = 0; nu < d; ++nu) acc += ws.gamma[lam](mu, nu) * v[mu] * v[nu];
            dy[d + lam] = -acc;
        }
        if (!problem.connection) {
            dy.segment(2 * d, 2 * m * m).setZero();
            return;
        }
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i)
                W(i, j) = Complex(y[2 * d + j * m + i], y[2 * d + m * m + j * m + i]);
        auto Bs = problem.connection(q);
        M.setZero();
        for (int mu = 0; mu < d; ++mu) M -= v[mu] * Bs[mu];
        dW = M * W;
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                dy[2 * d + j * m + i] = dW(i, j).real();
                dy[2 * d + m * m + j * m + i] = dW(i, j).imag();
            }
    }
};

Vec joint_initial_state(int d, int m, const Vec& y0, const Vec& v0) {
    Vec s(2 * d + 2 * m * m);
    s.setZero();
    s.head(d) = y0;
    s.segment(d, d) = v0;
    for (int i = 0; i < m; ++i) s[2 * d + i * m + i] = 1.0;  // W = identity
    return s;
}

CMat wilson_from_state(const Vec& s, int d, int m) {
    CMat W(m, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
            W(i, j) = Complex(s[2 * d + j * m + i], s[2 * d + m * m + j * m + i]);
    return W;
}

}  // namespace

std::vector<CMat> LaplaceProblem::connection_at(const Vec& x) const {
    if (connection) return connection(x);
    return std::vector<CMat>(dim, CMat::Zero(fiber_dim, fiber_dim));
}

CMat LaplaceProblem::potential_at(const Vec& x) const {
    if (potential) return potential(x);
    return CMat::Zero(fiber_dim, fiber_dim);
}

void LaplaceProblem::validate(int grid_per_axis) const {
    if (dim < 1 || fiber_dim < 1) throw ConfigError("problem: dim and fiber_dim must be >= 1");
    if (!metric_inv) throw ConfigError("problem: metric_inv field is required");
    if (chart_domain.lo.size() != dim || chart_domain.hi.size() != dim)
        throw ConfigError("problem: chart_domain dimension mismatch");
    for (int i = 0; i < dim; ++i)
        if (!(chart_domain.lo[i] < chart_domain.hi[i]))
            throw ConfigError("problem: chart_domain box is empty");

    Vec x(dim);
    std::vector<int> idx(dim, 0);
    const int n = grid_per_axis;
    long total = 1;
    for (int i = 0; i < dim; ++i) total *= n;
    for (long cell = 0; cell < total; ++cell) {
        long c = cell;
        for (int i = 0; i < dim; ++i) {
            idx[i] = static_cast<int>(c % n);
            c /= n;
            double t = (idx[i] + 0.5) / n;
            x[i] = chart_domain.lo[i] + t * (chart_domain.hi[i] - chart_domain.lo[i]);
        }
        Mat g = metric_inv(x);
        if (g.rows() != dim || g.cols() != dim)
            throw ConfigError("problem: metric_inv has wrong shape");
        if (!g.allFinite()) throw ConfigError("problem: metric_inv not finite at " + point_str(x));
        if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + g.cwiseAbs().maxCoeff()))
            throw ConfigError("problem: metric_inv not symmetric at " + point_str(x));
        Eigen::LLT<Mat> llt(g);
        if (llt.info() != Eigen::Success)
            throw ConfigError("problem: metric_inv not positive definite at " + point_str(x));
        if (potential) {
            CMat v = potential(x);
            if (v.rows() != fiber_dim || v.cols() != fiber_dim)
                throw ConfigError("problem: potential has wrong shape");
            if (!v.allFinite())
                throw ConfigError("problem: potential not finite at " + point_str(x));
            if ((v - v.adjoint()).cwiseAbs().maxCoeff() >
                1e-10 * (1.0 + v.cwiseAbs().maxCoeff()))
                throw ConfigError("problem: potential not Hermitian at " + point_str(x));
        }
        if (connection) {
            auto Bs = connection(x);
            if (static_cast<int>(Bs.size()) != dim)
                throw ConfigError("problem: connection must supply dim matrices");
            for (const auto& B : Bs) {
                if (B.rows() != fiber_dim || B.cols() != fiber_dim)
                    throw ConfigError("problem: connection matrix has wrong shape");
                if (!B.allFinite())
                    throw ConfigError("problem: connection not finite at " + point_str(x));
            }
        }
    }
}

MetricPack metric_pack(const LaplaceProblem& problem, const Vec& x) {
    if (!problem.chart_domain.contains(x))
        throw OutOfChart("metric_pack: point outside chart at " + point_str(x));
    MetricPack mp;
    mp.g_inv = problem.metric_inv(x);
    if (sym_condition(mp.g_inv) > 1e12)
        throw SingularMetric("metric_pack: condition number exceeds 1e12 at " + point_str(x));
    double det_inv;
    invert_spd(mp.g_inv, mp.g_lower, det_inv);
    mp.det_g = 1.0 / det_inv;
    mp.sqrt_g = std::sqrt(mp.det_g);
    return mp;
}

std::vector<Mat> christoffel(const LaplaceProblem& problem, const Vec& x,
                             const GeomOptions& opt) {
    ChristoffelScratch ws;
    ws.resize(problem.dim);
    christoffel_into(problem, x, fd_step_for(problem, opt), ws);
    return ws.gamma;
}

Geodesic geodesic_ivp(const LaplaceProblem& problem, const Vec& x0, const Vec& v0,
                      const GeomOptions& opt) {
    const int d = problem.dim;
    if (!problem.chart_domain.contains(x0))
        throw OutOfChart("geodesic_ivp: start outside chart at " + point_str(x0));
    GeodesicRhs rhs(problem, fd_step_for(problem, opt));
    ode::Options oopt;
    oopt.rtol = opt.ode_tol;
    oopt.atol = opt.ode_tol * 1e-2;
    ode::Rk45<GeodesicRhs&> solver(rhs, 2 * d, oopt);
    Vec s0(2 * d);
    s0.head(d) = x0;
    s0.segment(d, d) = v0;
    solver.init(0.0, s0);
    std::vector<ode::StepRecord> recs;
    try {
        solver.advance_to(1.0, &recs);
    } catch (const OutOfChart& e) {
        throw LeftChart(std::string("geodesic_ivp: trajectory left the chart (") + e.what() +
                        ")");
    }

    Geodesic geo;
    geo.start = x0;
    geo.v0 = v0;
    geo.knots.push_back({0.0, x0, v0});
    for (const auto& r : recs)
        geo.knots.push_back({r.t, r.y.head(d), r.y.segment(d, d)});
    geo.end = geo.knots.back().pos;
    Mat g_lower;
    double det;
    invert_spd(problem.metric_inv(x0), g_lower, det);
    geo.energy = v0.dot(g_lower * v0);
    return geo;
}

Geodesic geodesic_bvp(const LaplaceProblem& problem, const Vec& y, const Vec& x,
                      const GeomOptions& opt, const Vec* v0_hint) {
    const int d = problem.dim;
    if (!problem.chart_domain.contains(y))
        throw OutOfChart("geodesic_bvp: start outside chart at " + point_str(y));
    if (!problem.chart_domain.contains(x))
        throw OutOfChart("geodesic_bvp: end outside chart at " + point_str(x));

    if ((x - y).norm() < 1e-12) {
        Geodesic geo;
        geo.start = y;
        geo.end = x;
        geo.v0 = Vec::Zero(d);
        geo.knots.push_back({0.0, y, geo.v0});
        geo.knots.push_back({1.0, x, geo.v0});
        geo.energy = 0.0;
        return geo;
    }

    GeodesicRhs rhs(problem, fd_step_for(problem, opt));
    ode::Options oopt;
    oopt.rtol = opt.ode_tol;
    oopt.atol = opt.ode_tol * 1e-2;

    Vec final_state(2 * d);
    auto endpoint = [&](const Vec& v0) -> Vec {
        ode::Rk45<GeodesicRhs&> solver(rhs, 2 * d, oopt);
        Vec s0(2 * d);
        s0.head(d) = y;
        s0.segment(d, d) = v0;
        solver.init(0.0, s0);
        solver.advance_to(1.0);
        final_state = solver.state();
        return final_state.head(d);
    };

    Vec v0 = v0_hint ? *v0_hint : Vec(x - y);
    Vec miss = endpoint(v0) - x;
    Vec accepted_state = final_state;
    Mat J(d, d);
    bool have_jacobian = false;
    int iter = 0;
    for (; iter < opt.max_newton && miss.norm() >= opt.bvp_tol; ++iter) {
        const double hj = 1e-7 * std::max(1.0, v0.norm());
        for (int j = 0; j < d; ++j) {
            Vec vj = v0;
            vj[j] += hj;
            J.col(j) = (endpoint(vj) - (miss + x)) / hj;
        }
        have_jacobian = true;
        Vec step = J.partialPivLu().solve(-miss);
        double damp = 1.0;
        Vec best_v = v0;
        Vec best_miss = miss;
        for (int back = 0; back < 5; ++back) {
            Vec v_try = v0 + damp * step;
            Vec m_try;
            try {
                m_try = endpoint(v_try) - x;
            } catch (const NumericalError&) {
                damp *= 0.5;
                continue;
            }
            if (m_try.norm() < best_miss.norm()) {
                best_v = v_try;
                best_miss = m_try;
                accepted_state = final_state;
                break;
            }
            damp *= 0.5;
        }
        if ((best_v - v0).norm() == 0.0)
            throw NoConvergence("geodesic_bvp: Newton stalled after " + std::to_string(iter) +
                                " iterations, residual " + std::to_string(miss.norm()));
        v0 = best_v;
        miss = best_miss;
    }
    if (miss.norm() >= opt.bvp_tol)
        throw NoConvergence("geodesic_bvp: no convergence in " +
                            std::to_string(opt.max_newton) + " iterations (pair " +
                            point_str(y) + " -> " + point_str(x) + ")");
    // One quasi-Newton polish with the last Jacobian; keeps the declared
    // stopping rule but typically lands the endpoint several digits deeper.
    if (have_jacobian && miss.norm() > 1e-13) {
        Vec v_try = v0 + J.partialPivLu().solve(-miss);
        try {
            Vec m_try = endpoint(v_try) - x;
            if (m_try.norm() < miss.norm()) {
                v0 = v_try;
                miss = m_try;
                accepted_state = final_state;
            }
        } catch (const NumericalError&) {
        }
    }

    Geodesic geo;
    geo.start = y;
    geo.v0 = v0;
    geo.end = accepted_state.head(d);
    geo.knots.push_back({0.0, y, v0});
    geo.knots.push_back({1.0, geo.end, accepted_state.segment(d, d)});
    Mat g_lower;
    double det;
    invert_spd(problem.metric_inv(y), g_lower, det);
    geo.energy = v0.dot(g_lower * v0);
    return geo;
}

CMat wilson_line(const LaplaceProblem& problem, const Geodesic& geo, const GeomOptions& opt) {
    const int d = problem.dim;
    const int m = problem.fiber_dim;
    if (!problem.connection) return CMat::Identity(m, m);
    JointRhs rhs(problem, fd_step_for(problem, opt));
    ode::Options oopt;
    oopt.rtol = opt.ode_tol;
    oopt.atol = opt.ode_tol * 1e-2;
    ode::Rk45<JointRhs&> solver(rhs, 2 * d + 2 * m * m, oopt);
    solver.init(0.0, joint_initial_state(d, m, geo.start, geo.v0));
    solver.advance_to(1.0);
    return wilson_from_state(solver.state(), d, m);
}

Geodesic reversed(const Geodesic& geo) {
    Geodesic r;
    r.start = geo.end;
    r.end = geo.start;
    r.energy = geo.energy;
    r.v0 = -geo.knots.back().vel;
    r.knots.reserve(geo.knots.size());
    for (auto it = geo.knots.rbegin(); it != geo.knots.rend(); ++it)
        r.knots.push_back({1.0 - it->lambda, it->pos, -it->vel});
    return r;
}

GeodesicFlow::GeodesicFlow(const LaplaceProblem& problem, const Geodesic& geo,
                           GeomOptions opt)
    : problem_(problem), opt_(opt), d_(problem.dim), m_(problem.fiber_dim),
      energy_(geo.energy) {
    checkpoints_.emplace_back(0.0, joint_initial_state(d_, m_, geo.start, geo.v0));
}

const Vec& GeodesicFlow::state_at(double lambda) const {
    auto cmp = [](const std::pair<double, Vec>& a, double t) { return a.first < t; };
    auto it = std::lower_bound(checkpoints_.begin(), checkpoints_.end(), lambda, cmp);
    if (it != checkpoints_.end() && it->first == lambda) return it->second;
    // integrate forward from the nearest checkpoint below
    auto base = it;
    --base;
    JointRhs rhs(problem_, fd_step_for(problem_, opt_));
    ode::Options oopt;
    oopt.rtol = opt_.ode_tol;
    oopt.atol = opt_.ode_tol * 1e-2;
    ode::Rk45<JointRhs&> solver(rhs, 2 * d_ + 2 * m_ * m_, oopt);
    solver.init(base->first, base->second);
    std::vector<ode::StepRecord> recs;
    solver.advance_to(lambda, &recs);
    std::size_t pos = static_cast<std::size_t>(it - checkpoints_.begin());
    std::vector<std::pair<double, Vec>> fresh;
    fresh.reserve(recs.size());
    for (auto& r : recs) fresh.emplace_back(r.t, std::move(r.y));
    checkpoints_.insert(checkpoints_.begin() + pos, std::make_move_iterator(fresh.begin()),
                        std::make_move_iterator(fresh.end()));
    return checkpoints_[pos + fresh.size() - 1].second;
}

Vec GeodesicFlow::position(double lambda) const { return state_at(lambda).head(d_); }

Vec GeodesicFlow::velocity(double lambda) const { return state_at(lambda).segment(d_, d_); }

CMat GeodesicFlow::wilson(double lambda) const {
    return wilson_from_state(state_at(lambda), d_, m_);
}

CMat GeodesicFlow::wilson_inv(double lambda) const {
    CMat W = wilson(lambda);
    return W.inverse();
}

}  // namespace heatlab
