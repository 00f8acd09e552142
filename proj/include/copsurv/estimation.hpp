#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "copsurv/math/optim.hpp"
#include "copsurv/math/parallel.hpp"
#include "copsurv/math/rng.hpp"
#include "copsurv/survival_model.hpp"

namespace copsurv {

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Right-censored sample: y_i = min(t_i, c_i), delta_i = 1{t_i <= c_i}.
struct Dataset {
    std::vector<double> y;
    std::vector<int> delta;

    std::size_t n() const { return y.size(); }

    void add(double yi, int di) {
        y.push_back(yi);
        delta.push_back(di);
    }

    std::size_t count_uncensored() const {
        std::size_t k = 0;
        for (int d : delta)
            if (d == 1) ++k;
        return k;
    }

    void validate() const {
        if (y.size() != delta.size())
            throw std::invalid_argument("Dataset: y and delta lengths differ");
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!(y[i] > 0.0) || !std::isfinite(y[i]))
                throw std::invalid_argument("Dataset: y must be positive and finite (record " +
                                            std::to_string(i) + ")");
            if (delta[i] != 0 && delta[i] != 1)
                throw std::invalid_argument("Dataset: delta must be 0 or 1 (record " +
                                            std::to_string(i) + ")");
        }
    }
};

// ---------------------------------------------------------------------------
// Parameter layout: the unconstrained chart the optimizer works in
// ---------------------------------------------------------------------------

/// Order of the unconstrained coordinates: margin_T block, margin_C block,
/// then (except under Independence) one dependence coordinate on the chosen
/// tau chart. Optionally pins the log-t tail index nu instead of estimating
/// it, removing that coordinate from the chart.
struct ParamLayout {
    CopulaFamily copula = CopulaFamily::Independence;
    MarginFamily margin_t = MarginFamily::LogNormal;
    MarginFamily margin_c = MarginFamily::LogNormal;
    DependenceTransform transform = DependenceTransform::LogitTau;
    std::optional<double> fixed_nu_t;
    std::optional<double> fixed_nu_c;

    std::size_t margin_t_dim() const {
        return margin_dim(margin_t) - ((fixed_nu_t && margin_t == MarginFamily::LogStudentT) ? 1 : 0);
    }
    std::size_t margin_c_dim() const {
        return margin_dim(margin_c) - ((fixed_nu_c && margin_c == MarginFamily::LogStudentT) ? 1 : 0);
    }
    bool has_dependence() const { return copula != CopulaFamily::Independence; }
    std::size_t dim() const { return margin_t_dim() + margin_c_dim() + (has_dependence() ? 1 : 0); }

    void validate() const {
        if (has_dependence()) check_transform_valid(transform, copula);
        if (fixed_nu_t && !(*fixed_nu_t > 0.0))
            throw std::invalid_argument("ParamLayout: fixed nu_T must be positive");
        if (fixed_nu_c && !(*fixed_nu_c > 0.0))
            throw std::invalid_argument("ParamLayout: fixed nu_C must be positive");
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        auto push_margin = [&out](MarginFamily f, bool fixed_nu, const char* suffix) {
            for (const std::string& nm : margin_unconstrained_names(f)) {
                if (fixed_nu && nm == "log(nu)") continue;
                // "mu" -> "mu_T"; "log(sigma)" -> "log(sigma_T)"
                const auto close = nm.find(')');
                if (close == std::string::npos)
                    out.push_back(nm + suffix);
                else
                    out.push_back(nm.substr(0, close) + suffix + ")");
            }
        };
        push_margin(margin_t, fixed_nu_t.has_value() && margin_t == MarginFamily::LogStudentT, "_T");
        push_margin(margin_c, fixed_nu_c.has_value() && margin_c == MarginFamily::LogStudentT, "_C");
        if (has_dependence()) out.push_back(transform_name(transform));
        return out;
    }

    /// Natural-scale coordinate names (margins, then tau and theta).
    std::vector<std::string> natural_names() const {
        std::vector<std::string> out;
        for (const std::string& nm : margin_param_names(margin_t)) out.push_back(nm + "_T");
        for (const std::string& nm : margin_param_names(margin_c)) out.push_back(nm + "_C");
        if (has_dependence()) {
            out.push_back("tau");
            out.push_back("theta");
        }
        return out;
    }

    std::vector<double> natural_values(const ModelSpec& m) const {
        std::vector<double> out;
        for (std::size_t j = 0; j < margin_dim(margin_t); ++j) out.push_back(m.margin_t.p[j]);
        for (std::size_t j = 0; j < margin_dim(margin_c); ++j) out.push_back(m.margin_c.p[j]);
        if (has_dependence()) {
            out.push_back(m.copula.tau);
            out.push_back(m.copula.theta);
        }
        return out;
    }

    std::vector<double> pack(const ModelSpec& m) const {
        std::vector<double> out;
        auto push_margin = [&out](const MarginParams& mp, bool drop_nu) {
            auto v = margin_to_unconstrained(mp);
            for (std::size_t j = (drop_nu ? 1 : 0); j < v.size(); ++j) out.push_back(v[j]);
        };
        push_margin(m.margin_t, fixed_nu_t.has_value() && margin_t == MarginFamily::LogStudentT);
        push_margin(m.margin_c, fixed_nu_c.has_value() && margin_c == MarginFamily::LogStudentT);
        if (has_dependence()) out.push_back(transform_tau(transform, m.copula.tau));
        return out;
    }

    ModelSpec unpack(std::span<const double> v) const {
        if (v.size() != dim()) throw std::invalid_argument("ParamLayout: wrong coordinate count");
        auto take_margin = [](MarginFamily f, const std::optional<double>& fixed_nu,
                              std::span<const double> s) {
            if (fixed_nu && f == MarginFamily::LogStudentT)
                return MarginParams::logstudentt(*fixed_nu, s[0], std::exp(s[1]));
            return margin_from_unconstrained(f, s);
        };
        const std::size_t dt = margin_t_dim(), dc = margin_c_dim();
        ModelSpec m{CopulaSpec::independence(), take_margin(margin_t, fixed_nu_t, v.subspan(0, dt)),
                    take_margin(margin_c, fixed_nu_c, v.subspan(dt, dc))};
        if (has_dependence())
            m.copula = CopulaSpec::from_tau(copula, untransform_tau(transform, v[dt + dc]));
        return m;
    }
};

/// Unconstrained coordinates plus the schema that interprets them.
struct ParamVector {
    ParamLayout layout;
    std::vector<double> values;
};

// ---------------------------------------------------------------------------
// Log-likelihood
// ---------------------------------------------------------------------------

/// Observed-data log-likelihood: uncensored records contribute
/// log f_T + log(1 - h_{C|T}), censored ones log f_C + log(1 - h_{T|C}).
/// 1 - h is floored at 1e-14 so boundary rounding cannot inject -inf.
inline double log_likelihood(const ModelSpec& m, const Dataset& d) {
    constexpr double one_minus_h_floor = 1e-14;
    double ll = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double yi = d.y[i];
        const double u = margin_cdf(m.margin_t, yi);
        const double v = margin_cdf(m.margin_c, yi);
        double term;
        if (d.delta[i] == 1) {
            const double h = h_c_given_t(m.copula, v, u);
            term = margin_log_pdf(m.margin_t, yi) + std::log(std::fmax(1.0 - h, one_minus_h_floor));
        } else {
            const double h = h_t_given_c(m.copula, u, v);
            term = margin_log_pdf(m.margin_c, yi) + std::log(std::fmax(1.0 - h, one_minus_h_floor));
        }
        if (!std::isfinite(term))
            throw numeric_error("log_likelihood: non-finite contribution at record " +
                                std::to_string(i));
        ll += term;
    }
    return ll;
}

inline double log_likelihood(const ParamVector& p, const Dataset& d) {
    return log_likelihood(p.layout.unpack(p.values), d);
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitOptions {
    DependenceTransform transform = DependenceTransform::LogitTau;
    std::optional<double> fixed_nu_t;
    std::optional<double> fixed_nu_c;
    std::optional<std::vector<double>> start; // warm start on the unconstrained chart
    int max_simplex_iterations = 2000;
    double simplex_ftol = 1e-10;
    int max_polish_iterations = 200;
    int restarts = 5;             // extra attempts taken only while unconverged
    std::uint64_t restart_seed = 0;
    bool compute_sandwich = false;
};

struct FitResult {
    ParamVector estimate;     // unconstrained chart
    ModelSpec model;          // the same point, natural scale
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    int restarts_used = 0;
    double gradient_inf_norm = 0.0;
    bool tau_near_boundary = false;
    double fitted_prob_uncensored = std::numeric_limits<double>::quiet_NaN();
    std::optional<Eigen::MatrixXd> cov_sandwich;
    std::optional<Eigen::MatrixXd> cov_bootstrap;
    std::vector<double> bootstrap_se; // empty unless bootstrap() filled it in
};

namespace detail {

struct LogMoments {
    double mean, sd;
};

inline LogMoments log_moments(const std::vector<double>& ys) {
    LogMoments lm{0.0, 0.3};
    if (ys.empty()) return lm;
    double s = 0.0;
    for (double y : ys) s += std::log(y);
    lm.mean = s / static_cast<double>(ys.size());
    double q = 0.0;
    for (double y : ys) {
        const double d = std::log(y) - lm.mean;
        q += d * d;
    }
    lm.sd = std::sqrt(q / static_cast<double>(ys.size()));
    lm.sd = std::fmax(lm.sd, 0.05); // tiny subsamples should not pin the scale at 0
    return lm;
}

/// Naive per-margin starting values ignoring censoring: method-of-moments on
/// log y for the subsample with the matching censoring status.
inline MarginParams naive_margin_start(MarginFamily f, const std::optional<double>& fixed_nu,
                                       const std::vector<double>& ys) {
    const LogMoments lm = log_moments(ys);
    constexpr double euler_gamma = 0.5772156649015329;
    switch (f) {
        case MarginFamily::LogNormal:
            return MarginParams::lognormal(lm.mean, lm.sd);
        case MarginFamily::Weibull: {
            // log Weibull is Gumbel(min): sd = pi/(a sqrt 6), mean = log b - gamma/a.
            const double a = 3.141592653589793 / (lm.sd * 2.449489742783178);
            const double b = std::exp(lm.mean + euler_gamma / a);
            return MarginParams::weibull(a, b);
        }
        case MarginFamily::LogLogistic: {
            // log of a log-logistic is logistic: sd = pi/(kappa sqrt 3), mean = -log lambda.
            const double kappa = 3.141592653589793 / (lm.sd * 1.7320508075688772);
            return MarginParams::loglogistic(std::exp(-lm.mean), kappa);
        }
        case MarginFamily::LogStudentT: {
            const double nu = fixed_nu ? *fixed_nu : 8.0;
            const double scale = (nu > 2.0) ? std::sqrt((nu - 2.0) / nu) : 0.7;
            return MarginParams::logstudentt(nu, lm.mean, lm.sd * scale);
        }
    }
    throw std::invalid_argument("naive_margin_start: unknown family");
}

inline std::vector<double> starting_point(const ParamLayout& L, const Dataset& d) {
    std::vector<double> y1, y0;
    for (std::size_t i = 0; i < d.n(); ++i)
        (d.delta[i] == 1 ? y1 : y0).push_back(d.y[i]);
    // An empty subsample (possible for Independence fits) falls back to all of y.
    const std::vector<double>& yt = y1.empty() ? d.y : y1;
    const std::vector<double>& yc = y0.empty() ? d.y : y0;
    ModelSpec m{CopulaSpec::independence(),
                naive_margin_start(L.margin_t, L.fixed_nu_t, yt),
                naive_margin_start(L.margin_c, L.fixed_nu_c, yc)};
    std::vector<double> x;
    {
        ParamLayout margins_only = L;
        margins_only.copula = CopulaFamily::Independence;
        x = margins_only.pack(m);
    }
    if (L.has_dependence()) x.push_back(0.0); // z = 0: tau = 0.5 (logit) or 0 (fisher z)
    return x;
}

} // namespace detail

inline Eigen::MatrixXd sandwich_covariance(const ParamVector& p, const Dataset& d);

/// Maximum-likelihood fit: simplex search from moment-based starting values,
/// then a quasi-Newton polish with numeric gradients; unconverged attempts
/// trigger up to opts.restarts randomized restarts around the best point so
/// far. Non-convergence is reported, not thrown.
inline FitResult fit(const Dataset& d, CopulaFamily family, MarginFamily mt, MarginFamily mc,
                     const FitOptions& opts = {}) {
    d.validate();
    if (d.n() == 0) throw std::invalid_argument("fit: empty dataset");
    ParamLayout L;
    L.copula = family;
    L.margin_t = mt;
    L.margin_c = mc;
    L.transform = opts.transform;
    L.fixed_nu_t = opts.fixed_nu_t;
    L.fixed_nu_c = opts.fixed_nu_c;
    L.validate();
    if (L.has_dependence()) {
        const std::size_t n1 = d.count_uncensored();
        if (n1 == 0 || n1 == d.n())
            throw std::invalid_argument(
                "fit: all records share one censoring status; the dependence parameter is not "
                "identifiable (an Independence fit is still possible)");
    }

    const double n = static_cast<double>(d.n());
    auto negll = [&](const std::vector<double>& x) -> double {
        try {
            return -log_likelihood(L.unpack(x), d);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const std::vector<double> x0 = opts.start ? *opts.start : detail::starting_point(L, d);
    if (x0.size() != L.dim()) throw std::invalid_argument("fit: starting point has wrong dimension");

    auto grad_bound = [&](double ll) { return 1e-4 * (1.0 + std::fabs(ll)) / n; };
    auto inf_norm = [](const std::vector<double>& g) {
        double m = 0.0;
        for (double t : g) m = std::fmax(m, std::fabs(t));
        return m;
    };

    FitResult best;
    best.estimate.layout = L;
    double best_f = std::numeric_limits<double>::infinity();
    int total_iterations = 0;
    math::Rng restart_rng(math::derive_seed(opts.restart_seed, 0x5eedULL));

    std::vector<double> attempt_start = x0;
    for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
        const auto nm = math::nelder_mead(negll, attempt_start, 0.25, opts.simplex_ftol,
                                          opts.max_simplex_iterations);
        total_iterations += nm.iterations;
        std::vector<double> x = nm.x;
        double f = nm.f;
        if (std::isfinite(f)) {
            const auto pol = math::bfgs(negll, x, 0.5 * grad_bound(-f), opts.max_polish_iterations);
            total_iterations += pol.iterations;
            if (pol.f <= f) {
                x = pol.x;
                f = pol.f;
            }
        }
        if (f < best_f) {
            best_f = f;
            best.estimate.values = x;
            best.restarts_used = attempt;
        }
        if (std::isfinite(best_f)) {
            const auto g = math::numeric_gradient(negll, best.estimate.values);
            best.gradient_inf_norm = inf_norm(g);
            if (best.gradient_inf_norm <= grad_bound(-best_f)) {
                best.converged = true;
                break;
            }
        }
        // Randomize the next attempt around the best point seen so far.
        attempt_start = std::isfinite(best_f) ? best.estimate.values : x0;
        for (double& c : attempt_start)
            c += (restart_rng.uniform_open() - 0.5) * 0.6 * (1.0 + std::fabs(c));
    }
    if (!std::isfinite(best_f))
        throw numeric_error("fit: objective non-finite at every restart");

    best.iterations = total_iterations;
    best.model = L.unpack(best.estimate.values);
    best.loglik = log_likelihood(best.model, d);
    if (L.has_dependence()) {
        const double at = std::fabs(best.model.copula.tau);
        best.tau_near_boundary = at >= 1.0 - 1e-6;
        if (family == CopulaFamily::Gaussian &&
            std::fabs(best.model.copula.theta) >= 1.0 - 1e-6 - 1e-9)
            best.tau_near_boundary = true;
    }
    try {
        best.fitted_prob_uncensored = prob_uncensored(best.model);
    } catch (const numeric_error&) {
        // leave NaN; diagnostic only
    }
    if (opts.compute_sandwich) {
        try {
            best.cov_sandwich = sandwich_covariance(best.estimate, d);
        } catch (const numeric_error&) {
            // absent on singular curvature
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Sandwich covariance (robust / misspecification-consistent)
// ---------------------------------------------------------------------------

/// Var(estimate) ~= A^{-1} B A^{-1} / n, where A is the numeric Hessian of the
/// average log-likelihood and B the average outer product of per-record score
/// vectors, both on the unconstrained chart.
inline Eigen::MatrixXd sandwich_covariance(const ParamVector& p, const Dataset& d) {
    const std::size_t dim = p.values.size();
    const double n = static_cast<double>(d.n());
    auto avg_ll = [&](const std::vector<double>& x) {
        return log_likelihood(p.layout.unpack(x), d) / n;
    };
    const auto H = math::numeric_hessian(avg_ll, p.values, 1e-4);
    Eigen::MatrixXd A(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) A(i, j) = H[i][j];

    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim, dim);
    {
        Dataset one;
        one.add(1.0, 1);
        std::vector<double> x = p.values;
        Eigen::VectorXd s(dim);
        for (std::size_t i = 0; i < d.n(); ++i) {
            one.y[0] = d.y[i];
            one.delta[0] = d.delta[i];
            for (std::size_t j = 0; j < dim; ++j) {
                const double h = 1e-5 * (1.0 + std::fabs(p.values[j]));
                x[j] = p.values[j] + h;
                const double fp = log_likelihood(p.layout.unpack(x), one);
                x[j] = p.values[j] - h;
                const double fm = log_likelihood(p.layout.unpack(x), one);
                x[j] = p.values[j];
                s(static_cast<Eigen::Index>(j)) = (fp - fm) / (2.0 * h);
            }
            B += s * s.transpose();
        }
        B /= n;
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin > 0.0) || smax / smin > 1e12)
        throw numeric_error("sandwich_covariance: curvature matrix is singular (condition number " +
                            std::to_string(smin > 0.0 ? smax / smin
                                                      : std::numeric_limits<double>::infinity()) +
                            ")");
    const Eigen::MatrixXd Ainv = A.inverse();
    Eigen::MatrixXd C = (Ainv * B * Ainv) / n;
    C = 0.5 * (C + C.transpose()).eval(); // exact symmetry
    return C;
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

struct BootstrapResult {
    std::vector<std::string> names;     // unconstrained-chart coordinate names
    std::vector<double> se;             // SD of the replicate estimates per coordinate
    Eigen::MatrixXd cov;                // replicate covariance, unconstrained chart
    std::vector<std::string> natural_names;
    std::vector<double> se_natural;     // SDs of the natural-scale re-evaluations
    int requested = 0;
    int used = 0;
    int dropped = 0;
};

/// n-out-of-n resampling with B refits. Replicate r draws its indices and its
/// optimizer stream from seeds derived by counter (so any thread count gives
/// the same output), warm-starts at `start` when provided, and is dropped if
/// unconverged. More than B/2 drops is an error.
inline BootstrapResult bootstrap(const Dataset& d, CopulaFamily family, MarginFamily mt,
                                 MarginFamily mc, int B, std::uint64_t seed,
                                 const FitOptions& opts = {}, int threads = 1) {
    if (B < 2) throw std::invalid_argument("bootstrap: B must be at least 2");
    d.validate();
    const std::size_t n = d.n();

    struct Replicate {
        bool ok = false;
        std::vector<double> x;
        std::vector<double> natural;
    };
    std::vector<Replicate> reps(static_cast<std::size_t>(B));

    math::parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t r) {
        math::Rng idx_rng(math::derive_seed(seed, 1, r));
        Dataset res;
        res.y.reserve(n);
        res.delta.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(idx_rng.below(n));
            res.add(d.y[k], d.delta[k]);
        }
        FitOptions ro = opts;
        ro.compute_sandwich = false;
        ro.restart_seed = math::derive_seed(seed, 2, r);
        try {
            const FitResult fr = fit(res, family, mt, mc, ro);
            if (fr.converged) {
                reps[r].ok = true;
                reps[r].x = fr.estimate.values;
                reps[r].natural = fr.estimate.layout.natural_values(fr.model);
            }
        } catch (const std::exception&) {
            // dropped (e.g. a resample lost one censoring status entirely)
        }
    });

    BootstrapResult out;
    out.requested = B;
    ParamLayout L;
    L.copula = family;
    L.margin_t = mt;
    L.margin_c = mc;
    L.transform = opts.transform;
    L.fixed_nu_t = opts.fixed_nu_t;
    L.fixed_nu_c = opts.fixed_nu_c;
    out.names = L.names();
    out.natural_names = L.natural_names();

    std::vector<const Replicate*> kept;
    for (const auto& r : reps)
        if (r.ok) kept.push_back(&r);
    out.used = static_cast<int>(kept.size());
    out.dropped = B - out.used;
    if (out.dropped > B / 2)
        throw numeric_error("bootstrap: " + std::to_string(out.dropped) + " of " +
                            std::to_string(B) + " replicates failed to converge");

    const std::size_t dim = L.dim();
    const std::size_t m = kept.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < dim; ++j)
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = kept[r]->x[j];
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const Eigen::MatrixXd centered = X.rowwise() - mean;
    out.cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    out.se.resize(dim);
    for (std::size_t j = 0; j < dim; ++j)
        out.se[j] = std::sqrt(out.cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));

    const std::size_t nnat = out.natural_names.size();
    out.se_natural.assign(nnat, 0.0);
    for (std::size_t j = 0; j < nnat; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < m; ++r) s += kept[r]->natural[j];
        const double mu = s / static_cast<double>(m);
        double q = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double dev = kept[r]->natural[j] - mu;
            q += dev * dev;
        }
        out.se_natural[j] = std::sqrt(q / static_cast<double>(m - 1));
    }
    return out;
}

} // namespace copsurv
