#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "copsurv/errors.hpp"
#include "copsurv/math/logspace.hpp"
#include "copsurv/math/normal.hpp"
#include "copsurv/math/quadrature.hpp"
#include "copsurv/math/roots.hpp"

namespace copsurv {

enum class CopulaFamily { Independence, Frank, Clayton, Gumbel, Gaussian };

inline std::string copula_family_name(CopulaFamily f) {
    switch (f) {
        case CopulaFamily::Independence: return "independence";
        case CopulaFamily::Frank: return "frank";
        case CopulaFamily::Clayton: return "clayton";
        case CopulaFamily::Gumbel: return "gumbel";
        case CopulaFamily::Gaussian: return "gaussian";
    }
    return "?";
}

inline CopulaFamily copula_family_from_name(const std::string& s) {
    if (s == "independence") return CopulaFamily::Independence;
    if (s == "frank") return CopulaFamily::Frank;
    if (s == "clayton") return CopulaFamily::Clayton;
    if (s == "gumbel") return CopulaFamily::Gumbel;
    if (s == "gaussian") return CopulaFamily::Gaussian;
    throw std::invalid_argument("unknown copula family '" + s + "'");
}

namespace detail {

// Copula arguments are clamped away from {0,1}; the h-functions and density
// are evaluated at margin CDF values which can round to exactly 0 or 1.
inline constexpr double u_eps = 1e-12;
inline double clamp_u(double u) { return std::fmin(std::fmax(u, u_eps), 1.0 - u_eps); }

// Frank evaluations below |theta| ~ 1e-8 switch to the independence limit;
// the two branches agree to O(theta) there.
inline constexpr double frank_theta_tiny = 1e-8;
// Gaussian correlation is kept off the boundary.
inline constexpr double gauss_rho_max = 1.0 - 1e-6;

} // namespace detail

// ---------------------------------------------------------------------------
// Kendall's tau <-> natural dependence parameter
// ---------------------------------------------------------------------------

namespace detail {

/// D1(theta) = (1/theta) * int_0^theta t/(e^t - 1) dt for theta > 0.
inline double debye1(double theta) {
    if (theta > 35.0) {
        // int_theta^inf t/(e^t-1) dt = sum_k (theta/k + 1/k^2) e^{-k theta};
        // the k=1 term alone is enough beyond theta = 35.
        constexpr double pi2_6 = 1.6449340668482264365;
        return (pi2_6 - (theta + 1.0) * std::exp(-theta)) / theta;
    }
    auto integrand = [](double t) {
        if (t < 1e-8) return 1.0 - 0.5 * t;
        return t / std::expm1(t);
    };
    const auto r = math::integrate(integrand, 0.0, theta, 1e-13, 1e-13);
    return r.value / theta;
}

/// Kendall's tau of a Frank copula; odd in theta, series near zero.
inline double frank_tau(double theta) {
    const double at = std::fabs(theta);
    if (at < 1e-300) return 0.0;
    double tau;
    if (at <= 0.2) {
        const double t2 = at * at;
        tau = at / 9.0 - at * t2 / 900.0 + at * t2 * t2 / 52920.0;
    } else {
        tau = 1.0 - 4.0 / at * (1.0 - debye1(at));
    }
    return theta > 0.0 ? tau : -tau;
}

/// Inverse of frank_tau by bisection (monotone increasing).
inline double frank_theta_from_tau(double tau) {
    const double at = std::fabs(tau);
    double lo = 1e-12, hi = 1.0;
    while (frank_tau(hi) < at) {
        hi *= 2.0;
        if (hi > 1e15) break; // tau(1e15) = 1 - 4e-15; nothing representable is closer
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (frank_tau(mid) < at) lo = mid; else hi = mid;
    }
    const double theta = 0.5 * (lo + hi);
    return tau > 0.0 ? theta : -theta;
}

} // namespace detail

/// tau as a function of the natural parameter. Closed forms except Frank,
/// which integrates the Debye function.
inline double theta_to_kendall_tau(CopulaFamily f, double theta) {
    switch (f) {
        case CopulaFamily::Independence:
            return 0.0;
        case CopulaFamily::Frank:
            if (theta == 0.0 || !std::isfinite(theta))
                throw std::domain_error("frank: theta must be finite and nonzero");
            return detail::frank_tau(theta);
        case CopulaFamily::Clayton:
            if (!(theta > 0.0)) throw std::domain_error("clayton: theta must be positive");
            return theta / (theta + 2.0);
        case CopulaFamily::Gumbel:
            if (!(theta >= 1.0)) throw std::domain_error("gumbel: theta must be >= 1");
            return (theta - 1.0) / theta;
        case CopulaFamily::Gaussian:
            if (!(std::fabs(theta) < 1.0)) throw std::domain_error("gaussian: |theta| must be < 1");
            return 2.0 * std::asin(theta) / 3.141592653589793238;
    }
    throw std::invalid_argument("theta_to_kendall_tau: unknown family");
}

/// Natural parameter from tau; domain errors when tau is outside the family's
/// attainable range.
inline double kendall_tau_to_theta(CopulaFamily f, double tau) {
    switch (f) {
        case CopulaFamily::Independence:
            if (tau != 0.0) throw std::domain_error("independence: tau must be 0");
            return 0.0;
        case CopulaFamily::Frank:
            if (!(std::fabs(tau) < 1.0) || tau == 0.0)
                throw std::domain_error("frank: tau must lie in (-1,1) excluding 0");
            return detail::frank_theta_from_tau(tau);
        case CopulaFamily::Clayton:
            if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("clayton: tau must lie in (0,1)");
            return 2.0 * tau / (1.0 - tau);
        case CopulaFamily::Gumbel:
            if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("gumbel: tau must lie in (0,1)");
            return 1.0 / (1.0 - tau);
        case CopulaFamily::Gaussian:
            if (!(std::fabs(tau) < 1.0)) throw std::domain_error("gaussian: tau must lie in (-1,1)");
            return std::sin(1.570796326794896619 * tau);
    }
    throw std::invalid_argument("kendall_tau_to_theta: unknown family");
}

// ---------------------------------------------------------------------------
// CopulaSpec
// ---------------------------------------------------------------------------

/// A copula family with its dependence parameter, carried in both the natural
/// (theta) and Kendall-tau form so either view is available without
/// re-deriving it.
struct CopulaSpec {
    CopulaFamily family = CopulaFamily::Independence;
    double theta = 0.0;
    double tau = 0.0;

    static CopulaSpec independence() { return {}; }

    static CopulaSpec from_theta(CopulaFamily f, double theta) {
        CopulaSpec c;
        c.family = f;
        if (f == CopulaFamily::Gaussian && std::fabs(theta) < 1.0) {
            // keep the correlation off the boundary so 1 - theta^2 stays usable
            theta = std::fmin(std::fmax(theta, -detail::gauss_rho_max), detail::gauss_rho_max);
        }
        c.theta = theta;
        c.tau = theta_to_kendall_tau(f, theta); // validates the domain
        return c;
    }

    static CopulaSpec from_tau(CopulaFamily f, double tau) {
        CopulaSpec c;
        c.family = f;
        switch (f) {
            case CopulaFamily::Independence:
                if (tau != 0.0) throw std::domain_error("independence: tau must be 0");
                return c;
            case CopulaFamily::Frank:
                // The optimizer's chart can land exactly on tau = 0; evaluate
                // that as the (continuous) independence limit instead of
                // rejecting it.
                if (std::fabs(tau) < 1e-12) {
                    c.theta = 0.0;
                    c.tau = 0.0;
                    return c;
                }
                break;
            case CopulaFamily::Gumbel:
                if (tau == 0.0) {
                    c.theta = 1.0;
                    c.tau = 0.0;
                    return c;
                }
                break;
            default:
                break;
        }
        c.theta = kendall_tau_to_theta(f, tau);
        if (f == CopulaFamily::Gaussian)
            c.theta = std::fmin(std::fmax(c.theta, -detail::gauss_rho_max), detail::gauss_rho_max);
        c.tau = tau;
        return c;
    }
};

// ---------------------------------------------------------------------------
// Frank internals (log-space, stable for |theta| up to ~1e300)
// ---------------------------------------------------------------------------

namespace detail {

// For theta > 0 everything reduces to D(u,v) = e^{-t u} + e^{-t v} - e^{-t}
// - e^{-t(u+v)} > 0, evaluated as log D via two positive groupings.
inline double frank_log_den_pos(double t, double u, double v) {
    return math::logsumexp2(-t * u + math::log1mexp(t * v),
                            -t * v + math::log1mexp(t * (1.0 - v)));
}

// For theta = -s < 0 the corresponding positive quantity is
// |D| = (e^s - 1) + (e^{s u} - 1)(e^{s v} - 1), again in log space.
inline double frank_log_absden_neg(double s, double u, double v) {
    return math::logsumexp2(s + math::log1mexp(s),
                            s * (u + v) + math::log1mexp(s * u) + math::log1mexp(s * v));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Gumbel internals
// ---------------------------------------------------------------------------

namespace detail {

struct GumbelParts {
    double x, y;      // -log u, -log v
    double lx, ly;    // log x, log y
    double lmax, del; // max(lx,ly), |lx - ly|
    double r;         // log(1 + e^{-theta*del})
    double lA;        // log S^{1/theta} = lmax + r/theta, S = x^theta + y^theta
    double A;         // S^{1/theta}
};

inline GumbelParts gumbel_parts(double theta, double u, double v) {
    GumbelParts g;
    g.x = -std::log(u);
    g.y = -std::log(v);
    g.lx = std::log(g.x);
    g.ly = std::log(g.y);
    g.lmax = std::fmax(g.lx, g.ly);
    g.del = std::fabs(g.lx - g.ly);
    g.r = std::log1p(std::exp(-theta * g.del));
    g.lA = g.lmax + g.r / theta;
    g.A = std::exp(g.lA);
    return g;
}

// log h_{U|V}(u|v) for Gumbel; grouped so no term overflows even for huge
// theta (where h tends to the comonotone step function).
inline double gumbel_log_h(double theta, double u, double v) {
    const GumbelParts g = gumbel_parts(theta, u, v);
    return -g.A + g.lA - math::softplus(theta * (g.lx - g.ly)) - g.ly + g.y;
}

inline double gumbel_log_density(double theta, double u, double v) {
    const GumbelParts g = gumbel_parts(theta, u, v);
    // (theta-1)(lx+ly) + (2/theta - 2) log S collapses to
    // -(theta-1)*del + 2r/theta - 2r, which is cancellation-free.
    return -g.A + g.x + g.y - (theta - 1.0) * g.del + 2.0 * g.r / theta - 2.0 * g.r +
           std::log1p((theta - 1.0) * std::exp(-g.lA));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Core copula evaluations
// ---------------------------------------------------------------------------

/// C(u, v): joint CDF of the copula. Arguments are clamped into
/// [1e-12, 1 - 1e-12] before evaluation (as in every function below).
inline double copula_cdf(const CopulaSpec& c, double u, double v) {
    u = detail::clamp_u(u);
    v = detail::clamp_u(v);
    switch (c.family) {
        case CopulaFamily::Independence:
            return u * v;
        case CopulaFamily::Frank: {
            const double t = c.theta;
            if (std::fabs(t) < detail::frank_theta_tiny) return u * v;
            if (t > 0.0)
                return -(detail::frank_log_den_pos(t, u, v) - math::log1mexp(t)) / t;
            const double s = -t;
            return (detail::frank_log_absden_neg(s, u, v) - s - math::log1mexp(s)) / s;
        }
        case CopulaFamily::Clayton: {
            const double t = c.theta;
            const double a = -t * std::log(u), b = -t * std::log(v);
            const double m = std::fmax(a, b);
            double logT;
            if (m < 30.0)
                logT = std::log1p(std::expm1(a) + std::expm1(b));
            else
                logT = m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
            return std::exp(-logT / t);
        }
        case CopulaFamily::Gumbel: {
            const auto g = detail::gumbel_parts(c.theta, u, v);
            return std::exp(-g.A);
        }
        case CopulaFamily::Gaussian:
            return math::bvn_cdf(math::norm_quantile(u), math::norm_quantile(v), c.theta);
    }
    throw std::invalid_argument("copula_cdf: unknown family");
}

/// h_{U|V}(u | v) = dC/dv: conditional CDF of the first coordinate given the
/// second. All five families are exchangeable, so the companion conditional
/// h_{V|U} is this same function with the roles of the arguments swapped.
inline double h_t_given_c(const CopulaSpec& c, double u, double v) {
    u = detail::clamp_u(u);
    v = detail::clamp_u(v);
    const double h = [&]() -> double {
        switch (c.family) {
            case CopulaFamily::Independence:
                return u;
            case CopulaFamily::Frank: {
                const double t = c.theta;
                if (std::fabs(t) < detail::frank_theta_tiny) return u;
                if (t > 0.0)
                    return std::exp(-t * v + math::log1mexp(t * u) -
                                    detail::frank_log_den_pos(t, u, v));
                const double s = -t;
                return std::exp(s * (u + v) + math::log1mexp(s * u) -
                                detail::frank_log_absden_neg(s, u, v));
            }
            case CopulaFamily::Clayton: {
                const double t = c.theta;
                const double a = -t * std::log(u), b = -t * std::log(v);
                const double m = std::fmax(a, b);
                double logT;
                if (m < 30.0)
                    logT = std::log1p(std::expm1(a) + std::expm1(b));
                else
                    logT = m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
                return std::exp((1.0 + 1.0 / t) * (b - logT));
            }
            case CopulaFamily::Gumbel:
                return std::exp(detail::gumbel_log_h(c.theta, u, v));
            case CopulaFamily::Gaussian: {
                const double x = math::norm_quantile(u), y = math::norm_quantile(v);
                return math::norm_cdf((x - c.theta * y) / std::sqrt(1.0 - c.theta * c.theta));
            }
        }
        throw std::invalid_argument("h_t_given_c: unknown family");
    }();
    // a conditional CDF: extreme parameters may overshoot the bounds by ulps
    return std::fmin(1.0, std::fmax(0.0, h));
}

/// h_{V|U}(v | u) = dC/du. By exchangeability this is h_{U|V} with swapped
/// arguments; kept as a named function because the two play different roles
/// in the observed-data likelihood.
inline double h_c_given_t(const CopulaSpec& c, double v, double u) {
    return h_t_given_c(c, v, u);
}

inline double copula_log_density(const CopulaSpec& c, double u, double v);

/// Copula density c(u, v).
inline double copula_density(const CopulaSpec& c, double u, double v) {
    return std::exp(copula_log_density(c, u, v));
}

/// Inverse of u -> h_{U|V}(u | v) for fixed v: the workhorse of conditional
/// sampling. Closed form everywhere except Gumbel, which uses bracketed
/// Newton (the density is the exact derivative of h).
inline double inverse_h(const CopulaSpec& c, double w, double v) {
    if (!(w > 0.0 && w < 1.0))
        throw std::domain_error("inverse_h: w must lie strictly in (0,1)");
    v = detail::clamp_u(v);
    switch (c.family) {
        case CopulaFamily::Independence:
            return w;
        case CopulaFamily::Frank: {
            const double t = c.theta;
            if (std::fabs(t) < detail::frank_theta_tiny) return w;
            const double lq = std::log1p(-w) - std::log(w); // log((1-w)/w)
            if (t > 0.0)
                return -(math::logsumexp2(lq - t * v, -t) - math::softplus(lq - t * v)) / t;
            const double s = -t;
            const double li = s + math::log1mexp(s) - math::softplus(lq + s * v);
            return math::softplus(li) / s;
        }
        case CopulaFamily::Clayton: {
            const double t = c.theta;
            const double b = -t * std::log(v);
            const double logT = b - std::log(w) * t / (t + 1.0);
            const double a = logT + std::log1p(std::exp(-logT) - std::exp(b - logT));
            return std::exp(-a / t);
        }
        case CopulaFamily::Gumbel: {
            const double lw = std::log(w);
            auto f = [&](double u) { return detail::gumbel_log_h(c.theta, u, v) - lw; };
            auto df = [&](double u) {
                // d log h / du = c(u,v) / h(u|v)
                return std::exp(detail::gumbel_log_density(c.theta, u, v) -
                                detail::gumbel_log_h(c.theta, u, v));
            };
            const auto r = math::newton_bracketed(f, df, w, detail::u_eps, 1.0 - detail::u_eps,
                                                  1e-12, 100);
            return r.x;
        }
        case CopulaFamily::Gaussian: {
            const double y = math::norm_quantile(v);
            const double z = c.theta * y + std::sqrt(1.0 - c.theta * c.theta) * math::norm_quantile(w);
            return math::norm_cdf(z);
        }
    }
    throw std::invalid_argument("inverse_h: unknown family");
}

inline double copula_log_density(const CopulaSpec& c, double u, double v) {
    u = detail::clamp_u(u);
    v = detail::clamp_u(v);
    switch (c.family) {
        case CopulaFamily::Independence:
            return 0.0;
        case CopulaFamily::Frank: {
            const double t = c.theta;
            if (std::fabs(t) < detail::frank_theta_tiny) return 0.0;
            if (t > 0.0)
                return std::log(t) + math::log1mexp(t) - t * (u + v) -
                       2.0 * detail::frank_log_den_pos(t, u, v);
            const double s = -t;
            return std::log(s) + s + math::log1mexp(s) + s * (u + v) -
                   2.0 * detail::frank_log_absden_neg(s, u, v);
        }
        case CopulaFamily::Clayton: {
            const double t = c.theta;
            const double a = -t * std::log(u), b = -t * std::log(v);
            const double m = std::fmax(a, b);
            double logT;
            if (m < 30.0)
                logT = std::log1p(std::expm1(a) + std::expm1(b));
            else
                logT = m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
            return std::log1p(t) + (1.0 + 1.0 / t) * (a + b) - (2.0 + 1.0 / t) * logT;
        }
        case CopulaFamily::Gumbel:
            return detail::gumbel_log_density(c.theta, u, v);
        case CopulaFamily::Gaussian: {
            const double x = math::norm_quantile(u), y = math::norm_quantile(v);
            const double t = c.theta, omt = 1.0 - t * t;
            return -0.5 * std::log(omt) - (t * t * (x * x + y * y) - 2.0 * t * x * y) / (2.0 * omt);
        }
    }
    throw std::invalid_argument("copula_log_density: unknown family");
}

// ---------------------------------------------------------------------------
// Unconstrained charts for the dependence parameter
// ---------------------------------------------------------------------------

/// Chart used by the optimizer for the dependence coordinate. LogitTau maps
/// tau in (0,1); FisherZTau maps tau in (-1,1) and is only meaningful for
/// families whose tau range is two-sided (Frank, Gaussian).
enum class DependenceTransform { LogitTau, FisherZTau };

inline std::string transform_name(DependenceTransform t) {
    return t == DependenceTransform::LogitTau ? "logit(tau)" : "fisherz(tau)";
}

inline DependenceTransform transform_from_name(const std::string& s) {
    if (s == "logit") return DependenceTransform::LogitTau;
    if (s == "fisherz") return DependenceTransform::FisherZTau;
    throw std::invalid_argument("unknown dependence transform '" + s + "' (use logit or fisherz)");
}

inline void check_transform_valid(DependenceTransform t, CopulaFamily f) {
    if (t == DependenceTransform::FisherZTau &&
        (f == CopulaFamily::Clayton || f == CopulaFamily::Gumbel))
        throw std::invalid_argument(
            "fisherz(tau) allows negative tau, which " + copula_family_name(f) +
            " cannot represent; use the logit transform");
}

/// tau -> unconstrained coordinate.
inline double transform_tau(DependenceTransform t, double tau) {
    if (t == DependenceTransform::LogitTau) {
        if (!(tau > 0.0 && tau < 1.0))
            throw std::domain_error("logit(tau): tau must lie strictly in (0,1)");
        return std::log(tau) - std::log1p(-tau);
    }
    if (!(tau > -1.0 && tau < 1.0))
        throw std::domain_error("fisherz(tau): tau must lie strictly in (-1,1)");
    return std::atanh(tau);
}

/// Unconstrained coordinate -> tau, clamped so downstream theta conversions
/// stay inside the family domain even for runaway optimizer steps.
inline double untransform_tau(DependenceTransform t, double z) {
    if (t == DependenceTransform::LogitTau) {
        const double tau = (z >= 0.0) ? 1.0 / (1.0 + std::exp(-z))
                                      : std::exp(z) / (1.0 + std::exp(z));
        return std::fmin(std::fmax(tau, 1e-15), 1.0 - 1e-12);
    }
    const double tau = std::tanh(z);
    return std::fmin(std::fmax(tau, -(1.0 - 1e-12)), 1.0 - 1e-12);
}

} // namespace copsurv
