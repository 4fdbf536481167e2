#include "heatlab/sdw.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "heatlab/quadrature.hpp"

namespace heatlab {

namespace {

void append_quantized(std::string& key, const Vec& v) {
    for (int i = 0; i < v.size(); ++i) {
        long long q = llround(v[i] * 1e12);
        char buf[sizeof(long long)];
        std::memcpy(buf, &q, sizeof q);
        key.append(buf, sizeof q);
    }
}

int offset_code(const std::array<int, 3>& off, int d) {
    int code = 0;
    for (int i = 0; i < d; ++i) code = code * 5 + (off[i] + 2);
    return code;
}

}  // namespace

SdwEngine::SdwEngine(const LaplaceProblem& problem, SdwOptions opt)
    : problem_(problem), opt_(opt) {}

std::string SdwEngine::pair_key(int k, const Vec& x, const Vec& y, double stencil) const {
    std::string key;
    key.reserve(8 + 3 * sizeof(long long) * problem_.dim);
    key.push_back(static_cast<char>(k + 64));
    append_quantized(key, x);
    append_quantized(key, y);
    long long q = llround(stencil * 1e12);
    key.append(reinterpret_cast<const char*>(&q), sizeof q);
    return key;
}

double SdwEngine::stencil_for(const Vec& x, const Vec& y) const {
    double margin = std::numeric_limits<double>::infinity();
    const Box& box = problem_.chart_domain;
    for (int i = 0; i < problem_.dim; ++i) {
        for (const Vec* pt : {&x, &y}) {
            margin = std::min(margin, (*pt)[i] - box.lo[i]);
            margin = std::min(margin, box.hi[i] - (*pt)[i]);
        }
    }
    return std::clamp(std::min(opt_.stencil_width, 0.4 * margin), opt_.stencil_min,
                      opt_.stencil_max);
}

double SdwEngine::delta_sqrt(const Vec& x, const Vec& y) {
    std::string key = pair_key(-1, x, y, 0.0);
    if (auto hit = memo_vv_.find(key)) return *hit;
    double v = std::sqrt(van_vleck(problem_, x, y, opt_.synge));
    return memo_vv_.insert(key, v);
}

CMat SdwEngine::a(int k, const Vec& x, const Vec& y) {
    if (k < 0) throw ConfigError("sdw: coefficient order must be >= 0");
    // The cost budget applies per top-level request (one recursion tree).
    CallBudget budget;
    budget.cap = opt_.max_evals;
    return a_impl(k, x, y, stencil_for(x, y), budget);
}

CMat SdwEngine::a_impl(int k, const Vec& x, const Vec& y, double stencil,
                       CallBudget& budget) {
    std::string key = pair_key(k, x, y, stencil);
    if (auto hit = memo_a_.find(key)) return *hit;
    CMat v = compute_a(k, x, y, stencil, budget);
    return memo_a_.insert(key, std::move(v));
}

CMat SdwEngine::compute_a(int k, const Vec& x, const Vec& y, double stencil,
                          CallBudget& budget) {
    evals_.fetch_add(1);
    if (budget.used.fetch_add(1) + 1 > budget.cap)
        throw CostBudgetExceeded("sdw: transport evaluation budget exceeded (" +
                                 std::to_string(budget.cap) + ")");

    Geodesic geo = geodesic_bvp(problem_, y, x, opt_.synge.geom);
    if (k == 0) return wilson_line(problem_, geo, opt_.synge.geom);

    GeodesicFlow flow(problem_, geo, opt_.synge.geom);
    const bool trivial_gauge = !problem_.connection;
    auto integrand = [&](double s) -> CMat {
        Vec z = flow.position(s);
        CMat R = transport_rhs(k - 1, z, y, stencil, budget);
        double w = std::pow(s, k - 1);
        if (trivial_gauge) return CMat(w * R);
        return CMat(w * (flow.wilson_inv(s) * R));
    };
    quad::Options qopt;
    qopt.abs_tol = opt_.quad_abs_tol;
    qopt.rel_tol = opt_.quad_rel_tol;
    CMat integral = quad::integrate(integrand, 0.0, 1.0, qopt);
    if (trivial_gauge) return integral;
    return flow.wilson(1.0) * integral;
}

CMat SdwEngine::transport_rhs(int k, const Vec& z, const Vec& y, double stencil,
                              CallBudget& budget) {
    MatrixField f = [this, k, &y, stencil, &budget](const Vec& zz) -> CMat {
        return delta_sqrt(zz, y) * a_impl(k, zz, y, stencil, budget);
    };
    CMat Af = apply_A(f, z, stencil);
    return CMat(-(1.0 / delta_sqrt(z, y)) * Af);
}

CMat SdwEngine::apply_A(const MatrixField& f, const Vec& x, double stencil) const {
    const int d = problem_.dim;
    const int m = problem_.fiber_dim;
    if (!problem_.chart_domain.contains(x, 2.0 * stencil))
        throw OutOfChart("apply_A: stencil leaves the chart");

    // f values cached by stencil offset (units of `stencil`, entries in -2..2)
    std::unordered_map<int, CMat> fcache;
    std::array<int, 3> off{0, 0, 0};
    auto f_at = [&](const std::array<int, 3>& o) -> const CMat& {
        int code = offset_code(o, d);
        auto it = fcache.find(code);
        if (it != fcache.end()) return it->second;
        Vec z = x;
        for (int i = 0; i < d; ++i) z[i] += o[i] * stencil;
        return fcache.emplace(code, f(z)).first->second;
    };

    const double inv2h = 1.0 / (2.0 * stencil);

    Mat g_inv_c = problem_.metric_inv(x);
    Mat g_lower_c;
    double det_inv_c;
    invert_spd(g_inv_c, g_lower_c, det_inv_c);
    const double sqrt_g_c = std::sqrt(1.0 / det_inv_c);
    auto B_c = problem_.connection_at(x);
    CMat v_c = problem_.potential_at(x);

    // H^mu(z) = sqrt(g) g^{mu nu} (d_nu f + B_nu f) evaluated at z = x +- stencil e_mu
    CMat divH = CMat::Zero(m, m);
    CMat H(m, m), Df(m, m);
    for (int mu = 0; mu < d; ++mu) {
        CMat Hplus = CMat::Zero(m, m), Hminus = CMat::Zero(m, m);
        for (int sign = 0; sign < 2; ++sign) {
            off = {0, 0, 0};
            off[mu] = sign == 0 ? 1 : -1;
            Vec z = x;
            z[mu] += off[mu] * stencil;
            Mat g_inv_z = problem_.metric_inv(z);
            Mat g_lower_z;
            double det_inv_z;
            invert_spd(g_inv_z, g_lower_z, det_inv_z);
            const double sqrt_g_z = std::sqrt(1.0 / det_inv_z);
            auto B_z = problem_.connection_at(z);
            CMat& target = sign == 0 ? Hplus : Hminus;
            for (int nu = 0; nu < d; ++nu) {
                auto op = off, om = off;
                op[nu] += 1;
                om[nu] -= 1;
                Df = (f_at(op) - f_at(om)) * inv2h;
                if (problem_.connection) Df += B_z[nu] * f_at(off);
                target += (sqrt_g_z * g_inv_z(mu, nu)) * Df;
            }
        }
        divH += (Hplus - Hminus) * inv2h;
    }

    CMat out = -(1.0 / sqrt_g_c) * divH;
    const CMat& f0 = f_at({0, 0, 0});
    if (problem_.connection) {
        for (int mu = 0; mu < d; ++mu) {
            for (int nu = 0; nu < d; ++nu) {
                if (g_inv_c(mu, nu) == 0.0) continue;
                std::array<int, 3> op{0, 0, 0}, om{0, 0, 0};
                op[nu] = 1;
                om[nu] = -1;
                Df = (f_at(op) - f_at(om)) * inv2h + B_c[nu] * f0;
                out -= g_inv_c(mu, nu) * (B_c[mu] * Df);
            }
        }
    }
    out -= v_c * f0;
    return out;
}

SdwTable SdwEngine::coefficients(const Vec& x, const Vec& y, int order) {
    SdwTable table;
    table.x = x;
    table.y = y;
    table.order = order;
    table.stencil_width = stencil_for(x, y);
    table.transport_tol = opt_.quad_rel_tol;
    table.coeffs.reserve(order + 1);
    for (int k = 0; k <= order; ++k) table.coeffs.push_back(a(k, x, y));
    return table;
}

std::vector<CMat> SdwEngine::diagonal(const Vec& x, int order) {
    const double eps0 = opt_.diag_eps0;
    Vec u = Vec::Zero(problem_.dim);
    u[0] = 1.0;
    Vec y1 = x + eps0 * u;
    Vec y2 = x + 0.5 * eps0 * u;
    if (!problem_.chart_domain.contains(y1)) {
        y1 = x - eps0 * u;
        y2 = x - 0.5 * eps0 * u;
    }
    std::vector<CMat> out;
    out.reserve(order + 1);
    for (int k = 0; k <= order; ++k) {
        CMat c1 = a(k, x, y1);
        CMat c2 = a(k, x, y2);
        out.push_back(2.0 * c2 - c1);  // Richardson toward eps = 0
    }
    return out;
}

double SdwEngine::recurrence_residual(const Vec& x, const Vec& y, int k, double lambda) {
    if (k < 1) throw ConfigError("recurrence_residual: k must be >= 1");
    Geodesic geo = geodesic_bvp(problem_, y, x, opt_.synge.geom);
    GeodesicFlow flow(problem_, geo, opt_.synge.geom);
    Vec z = flow.position(lambda);

    SyngeData sd = world_function(problem_, z, y, opt_.synge);
    const double stencil = stencil_for(x, y);
    auto B_z = problem_.connection_at(z);

    CallBudget budget;
    budget.cap = opt_.max_evals;
    CMat akz = a_impl(k, z, y, stencil, budget);
    CMat lhs = static_cast<double>(k) * akz;
    for (int mu = 0; mu < problem_.dim; ++mu) {
        Vec zp = z, zm = z;
        zp[mu] += stencil;
        zm[mu] -= stencil;
        CMat dmu =
            (a_impl(k, zp, y, stencil, budget) - a_impl(k, zm, y, stencil, budget)) /
            (2.0 * stencil);
        if (problem_.connection) dmu += B_z[mu] * akz;
        lhs += sd.sigma_upper[mu] * dmu;
    }
    lhs += -transport_rhs(k - 1, z, y, stencil, budget);  // + Delta^{-1/2} A Delta^{1/2} a_{k-1}
    return lhs.norm();
}

ConstantPotentialSource::ConstantPotentialSource(int dim, int fiber_dim, Complex c,
                                                 Eigen::VectorXcd xi)
    : d_(dim), m_(fiber_dim), c_(c), xi_(std::move(xi)) {
    if (xi_.size() != 0 && xi_.size() != d_)
        throw ConfigError("ConstantPotentialSource: xi dimension mismatch");
}

CMat ConstantPotentialSource::a(int n, const Vec& x, const Vec& y) {
    Complex amp(1.0, 0.0);
    if (xi_.size() == d_) {
        Complex phase(0.0, 0.0);
        for (int mu = 0; mu < d_; ++mu) phase += (x[mu] - y[mu]) * xi_[mu];
        amp = std::exp(-phase);
    }
    Complex cn(1.0, 0.0);
    double fact = 1.0;
    for (int j = 1; j <= n; ++j) {
        cn *= c_;
        fact *= j;
    }
    Complex coef = amp * cn / fact;
    return CMat(coef * CMat::Identity(m_, m_));
}

}  // namespace heatlab
