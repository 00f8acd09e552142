#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "copsurv/math/logspace.hpp"
#include "copsurv/math/normal.hpp"
#include "copsurv/math/student_t.hpp"

namespace copsurv {

/// Lifetime distributions on (0, inf). All four are closed under t -> log t
/// location-scale families (or close to it), which keeps the likelihood
/// well-behaved after the usual log/identity reparametrizations.
enum class MarginFamily { LogNormal, Weibull, LogLogistic, LogStudentT };

inline std::string margin_family_name(MarginFamily f) {
    switch (f) {
        case MarginFamily::LogNormal: return "lognormal";
        case MarginFamily::Weibull: return "weibull";
        case MarginFamily::LogLogistic: return "loglogistic";
        case MarginFamily::LogStudentT: return "logstudentt";
    }
    return "?";
}

inline MarginFamily margin_family_from_name(const std::string& s) {
    if (s == "lognormal") return MarginFamily::LogNormal;
    if (s == "weibull") return MarginFamily::Weibull;
    if (s == "loglogistic") return MarginFamily::LogLogistic;
    if (s == "logstudentt") return MarginFamily::LogStudentT;
    throw std::invalid_argument("unknown margin family '" + s + "'");
}

inline std::size_t margin_dim(MarginFamily f) {
    return f == MarginFamily::LogStudentT ? 3 : 2;
}

/// A margin family together with its natural parameters:
///   LogNormal   {mu, sigma}      log T ~ N(mu, sigma^2)
///   Weibull     {a, b}           shape a, scale b: F(t) = 1 - exp(-(t/b)^a)
///   LogLogistic {lambda, kappa}  F(t) = (lambda t)^kappa / (1 + (lambda t)^kappa)
///   LogStudentT {nu, mu, sigma}  (log T - mu)/sigma ~ t_nu
struct MarginParams {
    MarginFamily family;
    std::array<double, 3> p{};

    static MarginParams lognormal(double mu, double sigma) {
        require(std::isfinite(mu), "lognormal: mu must be finite");
        require(std::isfinite(sigma) && sigma > 0.0, "lognormal: sigma must be positive");
        return {MarginFamily::LogNormal, {mu, sigma, 0.0}};
    }
    static MarginParams weibull(double shape, double scale) {
        require(std::isfinite(shape) && shape > 0.0, "weibull: shape must be positive");
        require(std::isfinite(scale) && scale > 0.0, "weibull: scale must be positive");
        return {MarginFamily::Weibull, {shape, scale, 0.0}};
    }
    static MarginParams loglogistic(double lambda, double kappa) {
        require(std::isfinite(lambda) && lambda > 0.0, "loglogistic: lambda must be positive");
        require(std::isfinite(kappa) && kappa > 0.0, "loglogistic: kappa must be positive");
        return {MarginFamily::LogLogistic, {lambda, kappa, 0.0}};
    }
    static MarginParams logstudentt(double nu, double mu, double sigma) {
        require(std::isfinite(nu) && nu > 0.0, "logstudentt: nu must be positive");
        require(std::isfinite(mu), "logstudentt: mu must be finite");
        require(std::isfinite(sigma) && sigma > 0.0, "logstudentt: sigma must be positive");
        return {MarginFamily::LogStudentT, {nu, mu, sigma}};
    }

    std::size_t dim() const { return margin_dim(family); }

private:
    static void require(bool ok, const char* msg) {
        if (!ok) throw std::invalid_argument(msg);
    }
};

namespace detail {
inline void check_time(double t) {
    if (!(t > 0.0) || !std::isfinite(t))
        throw std::domain_error("margin: t must be a positive finite number");
}
inline void check_prob(double u) {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("margin: probability must lie strictly in (0,1)");
}
} // namespace detail

/// Log density. Deep in the tails this stays a large negative number instead
/// of collapsing through exp-underflow to log(0) = -inf.
inline double margin_log_pdf(const MarginParams& m, double t) {
    detail::check_time(t);
    const double lt = std::log(t);
    switch (m.family) {
        case MarginFamily::LogNormal: {
            const double z = (lt - m.p[0]) / m.p[1];
            return math::norm_log_pdf(z) - lt - std::log(m.p[1]);
        }
        case MarginFamily::Weibull: {
            const double a = m.p[0], b = m.p[1];
            const double lx = lt - std::log(b);
            // -(t/b)^a can exceed double range for absurd t; cap keeps the
            // result an honest "very negative" instead of -inf arithmetic.
            const double xa = std::exp(std::fmin(a * lx, 690.0));
            return std::log(a) - std::log(b) + (a - 1.0) * lx - std::fmin(xa, 1e300);
        }
        case MarginFamily::LogLogistic: {
            const double lw = m.p[1] * (std::log(m.p[0]) + lt); // log (lambda t)^kappa
            return std::log(m.p[1]) - lt + lw - 2.0 * math::softplus(lw);
        }
        case MarginFamily::LogStudentT: {
            const double z = (lt - m.p[1]) / m.p[2];
            return math::student_t_log_pdf(z, m.p[0]) - lt - std::log(m.p[2]);
        }
    }
    return 0.0;
}

inline double margin_pdf(const MarginParams& m, double t) { return std::exp(margin_log_pdf(m, t)); }

inline double margin_cdf(const MarginParams& m, double t) {
    detail::check_time(t);
    const double lt = std::log(t);
    switch (m.family) {
        case MarginFamily::LogNormal:
            return math::norm_cdf((lt - m.p[0]) / m.p[1]);
        case MarginFamily::Weibull: {
            const double lx = lt - std::log(m.p[1]);
            return -std::expm1(-std::exp(std::fmin(m.p[0] * lx, 690.0)));
        }
        case MarginFamily::LogLogistic: {
            // Logistic in log-time: F = 1 / (1 + exp(-kappa (log lambda + log t))).
            const double lw = m.p[1] * (std::log(m.p[0]) + lt);
            return 1.0 / (1.0 + std::exp(-lw));
        }
        case MarginFamily::LogStudentT:
            return math::student_t_cdf((lt - m.p[1]) / m.p[2], m.p[0]);
    }
    return 0.0;
}

inline double margin_quantile(const MarginParams& m, double u) {
    detail::check_prob(u);
    switch (m.family) {
        case MarginFamily::LogNormal:
            return std::exp(m.p[0] + m.p[1] * math::norm_quantile(u));
        case MarginFamily::Weibull:
            return m.p[1] * std::exp(std::log(-std::log1p(-u)) / m.p[0]);
        case MarginFamily::LogLogistic: {
            const double logit = std::log(u) - std::log1p(-u);
            return std::exp(logit / m.p[1] - std::log(m.p[0]));
        }
        case MarginFamily::LogStudentT:
            return std::exp(m.p[1] + m.p[2] * math::student_t_quantile(u, m.p[0]));
    }
    return 0.0;
}

/// Weibull in hazard-rate form: F(t) = 1 - exp(-rate * t^rho).
inline double weibull_rate(const MarginParams& m) {
    if (m.family != MarginFamily::Weibull) throw std::invalid_argument("weibull_rate: not a Weibull margin");
    return std::pow(m.p[1], -m.p[0]);
}
inline double weibull_rho(const MarginParams& m) {
    if (m.family != MarginFamily::Weibull) throw std::invalid_argument("weibull_rho: not a Weibull margin");
    return m.p[0];
}

inline std::vector<std::string> margin_param_names(MarginFamily f) {
    switch (f) {
        case MarginFamily::LogNormal: return {"mu", "sigma"};
        case MarginFamily::Weibull: return {"shape", "scale"};
        case MarginFamily::LogLogistic: return {"lambda", "kappa"};
        case MarginFamily::LogStudentT: return {"nu", "mu", "sigma"};
    }
    return {};
}

/// Names of the unconstrained coordinates, in pack order.
inline std::vector<std::string> margin_unconstrained_names(MarginFamily f) {
    switch (f) {
        case MarginFamily::LogNormal: return {"mu", "log(sigma)"};
        case MarginFamily::Weibull: return {"log(shape)", "log(scale)"};
        case MarginFamily::LogLogistic: return {"log(lambda)", "log(kappa)"};
        case MarginFamily::LogStudentT: return {"log(nu)", "mu", "log(sigma)"};
    }
    return {};
}

/// Map natural parameters to the unconstrained chart used by the optimizer:
/// positive parameters go through log, locations stay as-is.
inline std::vector<double> margin_to_unconstrained(const MarginParams& m) {
    switch (m.family) {
        case MarginFamily::LogNormal: return {m.p[0], std::log(m.p[1])};
        case MarginFamily::Weibull: return {std::log(m.p[0]), std::log(m.p[1])};
        case MarginFamily::LogLogistic: return {std::log(m.p[0]), std::log(m.p[1])};
        case MarginFamily::LogStudentT: return {std::log(m.p[0]), m.p[1], std::log(m.p[2])};
    }
    return {};
}

inline MarginParams margin_from_unconstrained(MarginFamily f, std::span<const double> v) {
    if (v.size() != margin_dim(f))
        throw std::invalid_argument("margin_from_unconstrained: wrong coordinate count");
    switch (f) {
        case MarginFamily::LogNormal: return MarginParams::lognormal(v[0], std::exp(v[1]));
        case MarginFamily::Weibull: return MarginParams::weibull(std::exp(v[0]), std::exp(v[1]));
        case MarginFamily::LogLogistic: return MarginParams::loglogistic(std::exp(v[0]), std::exp(v[1]));
        case MarginFamily::LogStudentT:
            return MarginParams::logstudentt(std::exp(v[0]), v[1], std::exp(v[2]));
    }
    throw std::invalid_argument("margin_from_unconstrained: unknown family");
}

} // namespace copsurv
