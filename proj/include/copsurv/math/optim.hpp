#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace copsurv::math {

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Central-difference gradient with per-coordinate step h_j = rel*(1+|x_j|).
template <typename F>
std::vector<double> numeric_gradient(const F& f, const std::vector<double>& x, double rel = 1e-5) {
    const std::size_t d = x.size();
    std::vector<double> g(d), xp = x;
    for (std::size_t j = 0; j < d; ++j) {
        const double h = rel * (1.0 + std::fabs(x[j]));
        xp[j] = x[j] + h;
        const double fp = f(xp);
        xp[j] = x[j] - h;
        const double fm = f(xp);
        xp[j] = x[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Central-difference Hessian (symmetric by construction), steps rel*(1+|x_j|).
template <typename F>
std::vector<std::vector<double>> numeric_hessian(const F& f, const std::vector<double>& x,
                                                 double rel = 1e-4) {
    const std::size_t d = x.size();
    std::vector<std::vector<double>> H(d, std::vector<double>(d, 0.0));
    std::vector<double> h(d);
    for (std::size_t j = 0; j < d; ++j) h[j] = rel * (1.0 + std::fabs(x[j]));
    const double f0 = f(x);
    std::vector<double> xp = x;
    for (std::size_t j = 0; j < d; ++j) {
        xp[j] = x[j] + h[j];
        const double fp = f(xp);
        xp[j] = x[j] - h[j];
        const double fm = f(xp);
        xp[j] = x[j];
        H[j][j] = (fp - 2.0 * f0 + fm) / (h[j] * h[j]);
    }
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j + 1; k < d; ++k) {
            xp[j] = x[j] + h[j]; xp[k] = x[k] + h[k];
            const double fpp = f(xp);
            xp[k] = x[k] - h[k];
            const double fpm = f(xp);
            xp[j] = x[j] - h[j]; xp[k] = x[k] + h[k];
            const double fmp = f(xp);
            xp[k] = x[k] - h[k];
            const double fmm = f(xp);
            xp[j] = x[j]; xp[k] = x[k];
            H[j][k] = H[k][j] = (fpp - fpm - fmp + fmm) / (4.0 * h[j] * h[k]);
        }
    }
    return H;
}

/// Nelder-Mead simplex minimization. Tolerates +inf objective values (barrier
/// regions); stops when the simplex f-spread falls below ftol or max_iter.
template <typename F>
OptimResult nelder_mead(const F& f, const std::vector<double>& x0, double simplex_scale = 0.25,
                        double ftol = 1e-10, int max_iter = 2000) {
    const std::size_t d = x0.size();
    const std::size_t np = d + 1;
    std::vector<std::vector<double>> pts(np, x0);
    for (std::size_t j = 0; j < d; ++j)
        pts[j + 1][j] += simplex_scale * (1.0 + std::fabs(x0[j]));
    std::vector<double> fv(np);
    int evals = 0;
    for (std::size_t i = 0; i < np; ++i) { fv[i] = f(pts[i]); ++evals; }

    std::vector<std::size_t> order(np);
    OptimResult res;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[np - 1], second = order[np - 2];
        const double spread = std::fabs(fv[worst] - fv[best]);
        if (spread <= ftol * (1.0 + std::fabs(fv[best])) && std::isfinite(fv[worst])) {
            res.converged = true;
            break;
        }
        // Centroid of all but the worst point.
        std::vector<double> cen(d, 0.0);
        for (std::size_t i = 0; i < np; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < d; ++j) cen[j] += pts[i][j];
        }
        for (std::size_t j = 0; j < d; ++j) cen[j] /= static_cast<double>(d);

        auto blend = [&](double t) {
            std::vector<double> y(d);
            for (std::size_t j = 0; j < d; ++j) y[j] = cen[j] + t * (pts[worst][j] - cen[j]);
            return y;
        };
        std::vector<double> xr = blend(-1.0);
        double fr = f(xr); ++evals;
        if (fr < fv[order[0]]) {
            std::vector<double> xe = blend(-2.0);
            double fe = f(xe); ++evals;
            if (fe < fr) { pts[worst] = std::move(xe); fv[worst] = fe; }
            else { pts[worst] = std::move(xr); fv[worst] = fr; }
        } else if (fr < fv[second]) {
            pts[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            double fc = f(xc); ++evals;
            if (fc < std::fmin(fr, fv[worst])) {
                pts[worst] = std::move(xc);
                fv[worst] = fc;
            } else { // shrink toward the best vertex
                for (std::size_t i = 0; i < np; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < d; ++j)
                        pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
                    fv[i] = f(pts[i]); ++evals;
                }
            }
        }
    }
    std::size_t ib = 0;
    for (std::size_t i = 1; i < np; ++i)
        if (fv[i] < fv[ib]) ib = i;
    res.x = pts[ib];
    res.f = fv[ib];
    res.iterations = iter;
    res.evaluations = evals;
    return res;
}

/// BFGS with numeric gradients and Armijo backtracking. Polishes a point that
/// is already near a minimum; never moves to a point with a larger objective.
template <typename F>
OptimResult bfgs(const F& f, const std::vector<double>& x0, double grad_tol = 1e-6,
                 int max_iter = 200, double grad_rel_step = 1e-5) {
    const std::size_t d = x0.size();
    OptimResult res;
    res.x = x0;
    res.f = f(x0);
    res.evaluations = 1;
    std::vector<double> g = numeric_gradient(f, res.x, grad_rel_step);
    res.evaluations += static_cast<int>(2 * d);
    // Inverse-Hessian approximation, started at the identity.
    std::vector<std::vector<double>> H(d, std::vector<double>(d, 0.0));
    for (std::size_t j = 0; j < d; ++j) H[j][j] = 1.0;

    auto inf_norm = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double t : v) m = std::fmax(m, std::fabs(t));
        return m;
    };

    for (int it = 1; it <= max_iter; ++it) {
        res.iterations = it;
        if (inf_norm(g) <= grad_tol) { res.converged = true; return res; }
        // Direction p = -H g.
        std::vector<double> p(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) p[i] -= H[i][j] * g[j];
        double gTp = 0.0;
        for (std::size_t j = 0; j < d; ++j) gTp += g[j] * p[j];
        if (!(gTp < 0.0)) { // not a descent direction: reset to steepest descent
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) H[i][j] = (i == j) ? 1.0 : 0.0;
                p[i] = -g[i];
            }
            gTp = 0.0;
            for (std::size_t j = 0; j < d; ++j) gTp += g[j] * p[j];
            if (!(gTp < 0.0)) { res.converged = inf_norm(g) <= grad_tol; return res; }
        }
        // Armijo backtracking.
        double t = 1.0;
        std::vector<double> xn(d);
        double fn = 0.0;
        bool ok = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (std::size_t j = 0; j < d; ++j) xn[j] = res.x[j] + t * p[j];
            fn = f(xn); ++res.evaluations;
            if (std::isfinite(fn) && fn <= res.f + 1e-4 * t * gTp) { ok = true; break; }
            t *= 0.5;
        }
        if (!ok) { res.converged = inf_norm(g) <= grad_tol; return res; }
        std::vector<double> gn = numeric_gradient(f, xn, grad_rel_step);
        res.evaluations += static_cast<int>(2 * d);
        // BFGS inverse update.
        std::vector<double> s(d), y(d);
        double ys = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            s[j] = xn[j] - res.x[j];
            y[j] = gn[j] - g[j];
            ys += y[j] * s[j];
        }
        if (ys > 1e-12 * inf_norm(s) * inf_norm(y) && ys > 0.0) {
            const double rho = 1.0 / ys;
            std::vector<double> Hy(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) Hy[i] += H[i][j] * y[j];
            double yHy = 0.0;
            for (std::size_t j = 0; j < d; ++j) yHy += y[j] * Hy[j];
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    H[i][j] += (1.0 + rho * yHy) * rho * s[i] * s[j] - rho * (Hy[i] * s[j] + s[i] * Hy[j]);
        }
        res.x = std::move(xn);
        res.f = fn;
        g = std::move(gn);
    }
    res.converged = inf_norm(g) <= grad_tol;
    return res;
}

} // namespace copsurv::math
