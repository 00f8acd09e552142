#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "copsurv/copulas.hpp"
#include "copsurv/margins.hpp"
#include "copsurv/math/quadrature.hpp"
#include "copsurv/math/rng.hpp"
#include "copsurv/math/roots.hpp"

namespace copsurv {

/// The full parametric model: survival time T, censoring time C, and the
/// copula tying their marginal CDFs together. One observes Y = min(T, C) and
/// the uncensoring indicator Delta = 1{T <= C}.
struct ModelSpec {
    CopulaSpec copula;
    MarginParams margin_t;
    MarginParams margin_c;
};

/// One grid row of the observable-data decomposition f_Y = f_{Y,1} + f_{Y,0}.
struct SubdensityPoint {
    double y;
    double f_y;
    double f_y_delta1;
    double f_y_delta0;
};

/// f_{Y,Delta}(y, 1) = f_T(y) * [1 - h_{C|T}(F_C(y) | F_T(y))]: the density of
/// an observed event at y jointly with it being uncensored.
inline double subdensity_uncensored(const ModelSpec& m, double y) {
    const double u = margin_cdf(m.margin_t, y);
    const double v = margin_cdf(m.margin_c, y);
    return margin_pdf(m.margin_t, y) * (1.0 - h_c_given_t(m.copula, v, u));
}

/// f_{Y,Delta}(y, 0) = f_C(y) * [1 - h_{T|C}(F_T(y) | F_C(y))].
inline double subdensity_censored(const ModelSpec& m, double y) {
    const double u = margin_cdf(m.margin_t, y);
    const double v = margin_cdf(m.margin_c, y);
    return margin_pdf(m.margin_c, y) * (1.0 - h_t_given_c(m.copula, u, v));
}

inline double density_y(const ModelSpec& m, double y) {
    return subdensity_uncensored(m, y) + subdensity_censored(m, y);
}

/// F_Y(y) = F_T(y) + F_C(y) - C(F_T(y), F_C(y)).
inline double cdf_y(const ModelSpec& m, double y) {
    const double u = margin_cdf(m.margin_t, y);
    const double v = margin_cdf(m.margin_c, y);
    return u + v - copula_cdf(m.copula, u, v);
}

namespace detail {

/// Integration window in s = log y covering everything but ~1e-10 of both
/// margins' mass, padded by two log-units.
inline void log_time_window(const ModelSpec& m, double& s_lo, double& s_hi) {
    constexpr double tail = 1e-10;
    const double lo = std::fmin(margin_quantile(m.margin_t, tail), margin_quantile(m.margin_c, tail));
    const double hi = std::fmax(margin_quantile(m.margin_t, 1.0 - tail),
                                margin_quantile(m.margin_c, 1.0 - tail));
    s_lo = std::log(lo) - 2.0;
    s_hi = std::log(hi) + 2.0;
}

/// One draw of (u, v) from the copula by conditional inversion:
/// V = v1, U = h^{-1}_{U|V}(v2 | v1).
inline std::pair<double, double> sample_uv(const CopulaSpec& c, math::Rng& rng) {
    const double v = rng.uniform_open();
    const double w = rng.uniform_open();
    return {inverse_h(c, w, v), v};
}

} // namespace detail

/// P(Delta = 1) by adaptive quadrature of the uncensored subdensity over
/// s = log y.
inline double prob_uncensored(const ModelSpec& m) {
    double s_lo, s_hi;
    detail::log_time_window(m, s_lo, s_hi);
    auto f = [&](double s) {
        const double y = std::exp(s);
        return subdensity_uncensored(m, y) * y;
    };
    const auto r = math::integrate(f, s_lo, s_hi, 1e-9, 1e-9, 4000);
    if (!r.converged)
        throw numeric_error("prob_uncensored: quadrature did not converge (err=" +
                            std::to_string(r.error) + ")");
    return r.value;
}

struct MonteCarloEstimate {
    double estimate;
    double std_error;
};

/// P(Delta = 1) by simulation: n draws of (T, C), proportion with T <= C.
inline MonteCarloEstimate prob_uncensored_mc(const ModelSpec& m, std::size_t n, math::Rng& rng) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [u, v] = detail::sample_uv(m.copula, rng);
        const double t = margin_quantile(m.margin_t, u);
        const double c = margin_quantile(m.margin_c, v);
        if (t <= c) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

/// Median of Y (root of cdf_y = 1/2), used to center diagnostic grids.
inline double median_y(const ModelSpec& m) {
    const double lo = std::fmin(margin_quantile(m.margin_t, 1e-8), margin_quantile(m.margin_c, 1e-8));
    const double hi = std::fmax(margin_quantile(m.margin_t, 1.0 - 1e-8),
                                margin_quantile(m.margin_c, 1.0 - 1e-8));
    const auto r = math::brent([&](double t) { return cdf_y(m, t) - 0.5; }, lo, hi, 1e-12);
    return r.x;
}

// ---------------------------------------------------------------------------
// Identifiability probe
// ---------------------------------------------------------------------------

/// One grid row of the identifiability diagnostics. a_tc / a_ct are the
/// Gaussian-copula trajectories  Phi^{-1}(F_T) - theta Phi^{-1}(F_C)  and its
/// swap; NaN for other families.
struct ProbePoint {
    double t;
    double F_t, F_c;
    double h_tc;          // h_{T|C}(F_T(t) | F_C(t))
    double h_ct;          // h_{C|T}(F_C(t) | F_T(t))
    double cdf_ratio;     // F_T(t) / F_C(t)
    double log_cdf_ratio; // log F_T(t) / log F_C(t)
    double a_tc, a_ct;
};

/// Numeric evidence about the identifiability of the model. Endpoint values
/// from the grid stand in for the analytic limits; monotonicity flags say
/// whether reading them as limits is even plausible. Diagnostic only: never
/// consulted by the fitting path.
struct ProbeReport {
    std::vector<ProbePoint> points;

    double h_tc_at_tmin = 0.0, h_tc_at_tmax = 0.0;
    double h_ct_at_tmin = 0.0, h_ct_at_tmax = 0.0;
    bool h_tc_decreasing_into_tmin = false; // values shrink as t decreases
    bool h_ct_decreasing_into_tmin = false;
    // "(C2a)/(C2b)": does the conditional-CDF limit vanish at t -> 0?
    bool c2a_h_tc_vanishes_at_0 = false;
    bool c2b_h_ct_vanishes_at_0 = false;

    double cdf_ratio_at_tmin = 0.0;
    bool cdf_ratio_to_zero = false;     // F_T/F_C < 1e-4 at the smallest t
    bool cdf_ratio_to_infinity = false; // > 1e4 at the smallest t
    double log_cdf_ratio_at_tmin = 0.0;

    bool has_gaussian_trajectories = false;
    bool has_nonfinite = false;
};

/// Default probe grid: log-spaced over [1e-6, 1e6] x median of Y.
inline std::vector<double> default_probe_grid(const ModelSpec& m, std::size_t n_points = 121) {
    const double med = median_y(m);
    const double s_lo = std::log(med) - 6.0 * 2.302585092994046;
    const double s_hi = std::log(med) + 6.0 * 2.302585092994046;
    std::vector<double> grid(n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        grid[i] = std::exp(s_lo + (s_hi - s_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_points - 1));
    return grid;
}

inline ProbeReport probe_identifiability(const ModelSpec& m, std::vector<double> t_grid) {
    std::sort(t_grid.begin(), t_grid.end());
    ProbeReport rep;
    rep.has_gaussian_trajectories = m.copula.family == CopulaFamily::Gaussian;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double t : t_grid) {
        ProbePoint p;
        p.t = t;
        p.F_t = margin_cdf(m.margin_t, t);
        p.F_c = margin_cdf(m.margin_c, t);
        p.h_tc = h_t_given_c(m.copula, p.F_t, p.F_c);
        p.h_ct = h_c_given_t(m.copula, p.F_c, p.F_t);
        p.cdf_ratio = p.F_t / p.F_c;
        p.log_cdf_ratio = std::log(p.F_t) / std::log(p.F_c);
        if (rep.has_gaussian_trajectories) {
            const double qt = math::norm_quantile(detail::clamp_u(p.F_t));
            const double qc = math::norm_quantile(detail::clamp_u(p.F_c));
            p.a_tc = qt - m.copula.theta * qc;
            p.a_ct = qc - m.copula.theta * qt;
        } else {
            p.a_tc = nan;
            p.a_ct = nan;
        }
        if (!std::isfinite(p.h_tc) || !std::isfinite(p.h_ct) || !std::isfinite(p.cdf_ratio))
            rep.has_nonfinite = true;
        rep.points.push_back(p);
    }
    if (rep.points.empty()) return rep;

    const auto& first = rep.points.front();
    const auto& last = rep.points.back();
    rep.h_tc_at_tmin = first.h_tc;
    rep.h_ct_at_tmin = first.h_ct;
    rep.h_tc_at_tmax = last.h_tc;
    rep.h_ct_at_tmax = last.h_ct;

    // Monotone decrease over the lowest decade of the grid (or what exists).
    const std::size_t k = std::min<std::size_t>(rep.points.size(), 10);
    rep.h_tc_decreasing_into_tmin = rep.h_ct_decreasing_into_tmin = true;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (rep.points[i].h_tc > rep.points[i + 1].h_tc) rep.h_tc_decreasing_into_tmin = false;
        if (rep.points[i].h_ct > rep.points[i + 1].h_ct) rep.h_ct_decreasing_into_tmin = false;
    }
    constexpr double vanish_tol = 1e-4;
    rep.c2a_h_tc_vanishes_at_0 = first.h_tc < vanish_tol;
    rep.c2b_h_ct_vanishes_at_0 = first.h_ct < vanish_tol;

    rep.cdf_ratio_at_tmin = first.cdf_ratio;
    rep.cdf_ratio_to_zero = first.cdf_ratio < 1e-4;
    rep.cdf_ratio_to_infinity = first.cdf_ratio > 1e4;
    rep.log_cdf_ratio_at_tmin = first.log_cdf_ratio;
    return rep;
}

} // namespace copsurv
