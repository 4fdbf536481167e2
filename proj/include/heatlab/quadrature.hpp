#pragma once

#include <cmath>
#include <utility>

#include "heatlab/common.hpp"

namespace heatlab::quad {

struct Options {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_depth = 14;
};

namespace detail {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (QUADPACK values).
inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double value_norm(double v) { return std::abs(v); }
inline double value_norm(const CMat& v) { return v.norm(); }

template <class T>
T value_zero(const T& like) {
    if constexpr (std::is_same_v<T, double>) {
        (void)like;
        return 0.0;
    } else {
        return T::Zero(like.rows(), like.cols());
    }
}

/// One G7/K15 panel. Returns the K15 estimate and |K15 - G7|.
template <class F, class T>
std::pair<T, double> panel(F& f, double a, double b, const T* shape_hint) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    T fc = f(c);
    T resk = value_zero(fc);
    T resg = value_zero(fc);
    resk += wgk[7] * fc;
    resg += wg[3] * fc;
    (void)shape_hint;
    for (int j = 0; j < 7; ++j) {
        T f1 = f(c - h * xgk[j]);
        T f2 = f(c + h * xgk[j]);
        resk += wgk[j] * (f1 + f2);
        if (j % 2 == 1) resg += wg[j / 2] * (f1 + f2);
    }
    T diff = resk - resg;
    return {h * resk, std::abs(h) * value_norm(diff)};
}

template <class F, class T>
void refine(F& f, double a, double b, T panel_val, double panel_err, double tol_per_len,
            int depth, const Options& opt, T& acc, double& err_acc) {
    // At max depth the panel is accepted and its error reported through
    // err_acc; integrands with a small noise floor stop refining there.
    if (panel_err <= tol_per_len * (b - a) || depth >= opt.max_depth) {
        acc += panel_val;
        err_acc += panel_err;
        return;
    }
    const double m = 0.5 * (a + b);
    auto [vl, el] = panel(f, a, m, &panel_val);
    auto [vr, er] = panel(f, m, b, &panel_val);
    // Noise-floor detection: when bisection stops reducing the error
    // estimate, the residual is evaluation noise, not truncation; further
    // splitting only multiplies work.
    if (depth >= 1 && el + er > 0.7 * panel_err) {
        acc += vl + vr;
        err_acc += el + er;
        return;
    }
    refine(f, a, m, std::move(vl), el, tol_per_len, depth + 1, opt, acc, err_acc);
    refine(f, m, b, std::move(vr), er, tol_per_len, depth + 1, opt, acc, err_acc);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b]. Works for double- and
/// complex-matrix-valued integrands. Deterministic: panels are accumulated in
/// left-to-right order regardless of refinement pattern.
template <class F>
auto integrate(F&& f, double a, double b, Options opt = {}) {
    using T = std::decay_t<decltype(f(a))>;
    auto [v0, e0] = detail::panel(f, a, b, static_cast<const T*>(nullptr));
    double scale = detail::value_norm(v0);
    double tol = std::max(opt.abs_tol, opt.rel_tol * scale);
    double tol_per_len = tol / std::max(b - a, 1e-300);
    T acc = detail::value_zero(v0);
    double err_acc = 0.0;
    detail::refine(f, a, b, std::move(v0), e0, tol_per_len, 0, opt, acc, err_acc);
    return acc;
}

}  // namespace heatlab::quad
