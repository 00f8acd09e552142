#pragma once

#include <cmath>
#include <queue>
#include <vector>

#include "copsurv/errors.hpp"

namespace copsurv::math {

struct IntegrationResult {
    double value = 0.0;
    double error = 0.0;      // estimated absolute error
    int intervals = 0;       // panels in the final subdivision
    bool converged = false;
};

namespace detail {

// 15-point Kronrod extension of 7-point Gauss on [-1,1] (positive half).
inline constexpr double gk_nodes[8] = {
    0.0,
    0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
    0.7415311855993945, 0.8648644233597691, 0.9491079123427585,
    0.9914553711208126};
inline constexpr double gk_wk[8] = {
    0.2094821410847278,
    0.2044329400752989, 0.1903505780647854, 0.1690047266392679,
    0.1406532597155259, 0.1047900103222502, 0.06309209262997855,
    0.02293532201052922};
// Gauss-7 weights matching nodes 0, +-gk_nodes[2], +-gk_nodes[4], +-gk_nodes[6].
inline constexpr double gk_wg[4] = {
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767, 0.1294849661688697};

template <typename F>
inline void gk15(const F& f, double a, double b, double& value, double& err) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double f0 = f(c);
    double resk = gk_wk[0] * f0;
    double resg = gk_wg[0] * f0;
    for (int j = 1; j < 8; ++j) {
        const double fl = f(c - h * gk_nodes[j]);
        const double fr = f(c + h * gk_nodes[j]);
        resk += gk_wk[j] * (fl + fr);
        if (j % 2 == 0) resg += gk_wg[j / 2] * (fl + fr);
    }
    value = resk * h;
    // Standard QUADPACK-style sharpened error estimate.
    const double diff = std::fabs((resk - resg) * h);
    err = (diff > 0.0) ? std::pow(200.0 * diff, 1.5) : 0.0;
    if (err > diff) err = diff;
    if (err == 0.0) err = std::fabs(value) * 1e-16;
}

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

} // namespace detail

/// Adaptive Gauss-Kronrod (G7,K15) on a finite interval: split the panel with
/// the largest error estimate until the total satisfies abs_tol or rel_tol.
template <typename F>
IntegrationResult integrate(const F& f, double a, double b, double abs_tol = 1e-10,
                            double rel_tol = 1e-10, int max_panels = 2000) {
    IntegrationResult res;
    if (a == b) { res.converged = true; return res; }
    std::priority_queue<detail::Panel> heap;
    detail::Panel p{a, b, 0.0, 0.0};
    detail::gk15(f, a, b, p.value, p.error);
    double total = p.value, toterr = p.error;
    if (!std::isfinite(total) || !std::isfinite(toterr))
        throw numeric_error("integrate: non-finite integrand encountered");
    heap.push(p);
    int n = 1;
    while (toterr > std::max(abs_tol, rel_tol * std::fabs(total)) && n < max_panels) {
        detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        detail::Panel l{worst.a, mid, 0.0, 0.0}, r{mid, worst.b, 0.0, 0.0};
        detail::gk15(f, l.a, l.b, l.value, l.error);
        detail::gk15(f, r.a, r.b, r.value, r.error);
        total += l.value + r.value - worst.value;
        toterr += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        ++n;
        if (!std::isfinite(total) || !std::isfinite(toterr))
            throw numeric_error("integrate: non-finite integrand encountered");
    }
    res.value = total;
    res.error = toterr;
    res.intervals = n;
    res.converged = toterr <= std::max(abs_tol, rel_tol * std::fabs(total));
    return res;
}

} // namespace copsurv::math
