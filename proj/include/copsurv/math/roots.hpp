#pragma once

#include <cmath>
#include <stdexcept>

#include "copsurv/errors.hpp"

namespace copsurv::math {

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Brent's method on [a, b]; requires a sign change. f is evaluated at most
/// max_iter + 2 times.
template <typename F>
RootResult brent(const F& f, double a, double b, double xtol = 1e-13, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return {a, 0.0, 0, true};
    if (fb == 0.0) return {b, 0.0, 0, true};
    if ((fa > 0.0) == (fb > 0.0))
        throw numeric_error("brent: root not bracketed");
    double c = a, fc = fa, d = b - a, e = d;
    RootResult res;
    for (int it = 1; it <= max_iter; ++it) {
        if ((fb > 0.0) == (fc > 0.0)) { c = a; fc = fa; d = b - a; e = d; }
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * 1.1102230246251565e-16 * std::fabs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::fabs(m) <= tol || fb == 0.0) {
            res = {b, fb, it, true};
            return res;
        }
        if (std::fabs(e) < tol || std::fabs(fa) <= std::fabs(fb)) {
            d = m; e = m; // bisection
        } else {
            double p, q;
            const double s = fb / fa;
            if (a == c) { // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else { // inverse quadratic
                const double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q; else p = -p;
            if (2.0 * p < std::fmin(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
                e = d; d = p / q;
            } else {
                d = m; e = m;
            }
        }
        a = b; fa = fb;
        b += (std::fabs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
    }
    res = {b, fb, max_iter, false};
    return res;
}

/// Newton iteration safeguarded by a shrinking bracket [lo, hi] on which f is
/// increasing with f(lo) < 0 < f(hi). Steps leaving the bracket fall back to
/// bisection, so convergence is unconditional for monotone f.
template <typename F, typename DF>
RootResult newton_bracketed(const F& f, const DF& df, double x0, double lo, double hi,
                            double ftol = 1e-13, int max_iter = 100) {
    double x = std::fmin(std::fmax(x0, lo), hi);
    RootResult res;
    for (int it = 1; it <= max_iter; ++it) {
        const double fx = f(x);
        if (std::fabs(fx) <= ftol) return {x, fx, it, true};
        if (fx > 0.0) hi = x; else lo = x;
        const double dfx = df(x);
        double xn = (dfx > 0.0 && std::isfinite(dfx)) ? x - fx / dfx : lo;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (xn == x) return {x, fx, it, true}; // bracket exhausted at double precision
        x = xn;
    }
    return {x, f(x), max_iter, false};
}

} // namespace copsurv::math
