#include "heatlab/presets.hpp"

#include <cmath>

namespace heatlab::presets {

namespace {

Box cube(int d, double lo, double hi) {
    Box b;
    b.lo = Vec::Constant(d, lo);
    b.hi = Vec::Constant(d, hi);
    return b;
}

MetricField euclidean(int d) {
    return [d](const Vec&) { return Mat::Identity(d, d); };
}

MatrixField scalar_potential(int m, const ScalarField& v) {
    return [m, v](const Vec& x) { return CMat(v(x) * CMat::Identity(m, m)); };
}

double two_well_value(double x, double c1, double c2, double width) {
    return c1 + (c2 - c1) * 0.5 * (1.0 + std::tanh(x / width));
}

}  // namespace

LaplaceProblem flat(int dim, int fiber_dim) {
    LaplaceProblem p;
    p.dim = dim;
    p.fiber_dim = fiber_dim;
    p.metric_inv = euclidean(dim);
    p.chart_domain = cube(dim, -3.0, 3.0);
    p.name = "flat";
    return p;
}

LaplaceProblem polar_flat() {
    LaplaceProblem p;
    p.dim = 2;
    p.fiber_dim = 1;
    p.metric_inv = [](const Vec& x) {
        Mat g(2, 2);
        g << 1.0, 0.0, 0.0, 1.0 / (x[0] * x[0]);
        return g;
    };
    Box b;
    b.lo = vec2(0.2, -2.6);
    b.hi = vec2(3.5, 2.6);
    p.chart_domain = b;
    p.name = "polar-flat";
    return p;
}

LaplaceProblem constant_potential(double c, int dim, int fiber_dim) {
    LaplaceProblem p = flat(dim, fiber_dim);
    p.potential = [c, fiber_dim](const Vec&) {
        return CMat(c * CMat::Identity(fiber_dim, fiber_dim));
    };
    p.name = "constant-potential";
    return p;
}

LaplaceProblem harmonic(double omega) {
    LaplaceProblem p = flat(1, 1);
    const double w2 = omega * omega;
    p.potential = scalar_potential(1, [w2](const Vec& x) { return -w2 * x[0] * x[0]; });
    p.name = "harmonic";
    return p;
}

LaplaceProblem two_well(double c1, double c2, double width, double center) {
    LaplaceProblem p = flat(1, 1);
    p.chart_domain = cube(1, -center - 2.0, center + 2.0);
    p.potential = scalar_potential(
        1, [=](const Vec& x) { return two_well_value(x[0], c1, c2, width); });
    p.name = "two-well";
    return p;
}

LaplaceProblem constant_abelian(const Vec& xi, double c, int fiber_dim) {
    const int d = static_cast<int>(xi.size());
    LaplaceProblem p = flat(d, fiber_dim);
    p.connection = [xi, d, fiber_dim](const Vec&) {
        std::vector<CMat> Bs(d);
        for (int mu = 0; mu < d; ++mu)
            Bs[mu] = xi[mu] * CMat::Identity(fiber_dim, fiber_dim);
        return Bs;
    };
    if (c != 0.0)
        p.potential = [c, fiber_dim](const Vec&) {
            return CMat(c * CMat::Identity(fiber_dim, fiber_dim));
        };
    p.name = "constant-abelian";
    return p;
}

LaplaceProblem abelian_antihermitian(const Vec& xi, double c) {
    const int d = static_cast<int>(xi.size());
    LaplaceProblem p = flat(d, 1);
    p.connection = [xi, d](const Vec&) {
        std::vector<CMat> Bs(d);
        for (int mu = 0; mu < d; ++mu) Bs[mu] = Complex(0.0, xi[mu]) * CMat::Identity(1, 1);
        return Bs;
    };
    if (c != 0.0)
        p.potential = [c](const Vec&) { return CMat(c * CMat::Identity(1, 1)); };
    p.name = "abelian-antihermitian";
    return p;
}

LaplaceProblem nonabelian_su2(double b1, double b2) {
    LaplaceProblem p = flat(2, 2);
    CMat sx(2, 2), sz(2, 2);
    sx << 0, 1, 1, 0;
    sz << 1, 0, 0, -1;
    const Complex i(0.0, 1.0);
    CMat B1 = i * b1 * sx;
    CMat B2 = i * b2 * sz;
    p.connection = [B1, B2](const Vec&) { return std::vector<CMat>{B1, B2}; };
    CMat v = 0.3 * sx + 0.1 * CMat::Identity(2, 2);
    p.potential = [v](const Vec&) { return v; };
    p.name = "nonabelian-su2";
    return p;
}

LaplaceProblem sphere_patch(double rho) {
    LaplaceProblem p;
    p.dim = 2;
    p.fiber_dim = 1;
    const double r2 = rho * rho;
    p.metric_inv = [r2](const Vec& x) {
        Mat g(2, 2);
        const double s = std::sin(x[0]);
        g << 1.0 / r2, 0.0, 0.0, 1.0 / (r2 * s * s);
        return g;
    };
    Box b;
    b.lo = vec2(0.6, -1.5);
    b.hi = vec2(2.5, 1.5);
    p.chart_domain = b;
    p.name = "sphere-patch";
    return p;
}

FlatProblem free_flat(int dim, int fiber_dim) {
    FlatProblem p;
    p.dim = dim;
    p.fiber_dim = fiber_dim;
    p.name = "free";
    return p;
}

FlatProblem harmonic_flat(double omega) {
    FlatProblem p;
    p.dim = 1;
    p.fiber_dim = 1;
    const double w2 = omega * omega;
    p.potential_ext = [w2](const Vec& x) {
        return CMat(-w2 * x[0] * x[0] * CMat::Identity(1, 1));
    };
    p.name = "harmonic";
    return p;
}

FlatProblem constant_abelian_flat(const Vec& xi, double c, int fiber_dim) {
    FlatProblem p;
    p.dim = static_cast<int>(xi.size());
    p.fiber_dim = fiber_dim;
    const int d = p.dim;
    p.connection_ext = [xi, d, fiber_dim](const Vec&) {
        std::vector<CMat> Bs(d);
        for (int mu = 0; mu < d; ++mu)
            Bs[mu] = xi[mu] * CMat::Identity(fiber_dim, fiber_dim);
        return Bs;
    };
    if (c != 0.0)
        p.potential_ext = [c, fiber_dim](const Vec&) {
            return CMat(c * CMat::Identity(fiber_dim, fiber_dim));
        };
    p.name = "constant-abelian";
    return p;
}

FlatProblem two_well_flat(double c1, double c2, double width, double center) {
    FlatProblem p;
    p.dim = 1;
    p.fiber_dim = 1;
    (void)center;
    p.potential_ext = [=](const Vec& x) {
        return CMat(two_well_value(x[0], c1, c2, width) * CMat::Identity(1, 1));
    };
    p.name = "two-well";
    return p;
}

FlatProblem scalar_flat(int dim, const ScalarField& v, const std::string& name) {
    FlatProblem p;
    p.dim = dim;
    p.fiber_dim = 1;
    p.potential_ext = [v](const Vec& x) { return CMat(v(x) * CMat::Identity(1, 1)); };
    p.name = name;
    return p;
}

FlatProblem extend(const LaplaceProblem& problem) {
    FlatProblem p;
    p.dim = problem.dim;
    p.fiber_dim = problem.fiber_dim;
    p.connection_ext = problem.connection;
    p.potential_ext = problem.potential;
    p.name = problem.name;
    return p;
}

LaplaceProblem restrict_to_chart(const FlatProblem& problem, const Box& box,
                                 const std::string& name) {
    LaplaceProblem p;
    p.dim = problem.dim;
    p.fiber_dim = problem.fiber_dim;
    p.metric_inv = euclidean(problem.dim);
    p.connection = problem.connection_ext;
    p.potential = problem.potential_ext;
    p.chart_domain = box;
    p.name = name;
    return p;
}

}  // namespace heatlab::presets
