#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace copsurv::math {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779;
inline constexpr double log_sqrt_2pi = 0.9189385332046727418;
inline constexpr double sqrt_2pi    = 2.5066282746310005024;

inline double norm_pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

inline double norm_log_pdf(double x) { return -log_sqrt_2pi - 0.5 * x * x; }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

/// Inverse standard normal CDF, Wichura's PPND16 rational approximations
/// (relative error below 1e-15 over the full double range).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("norm_quantile: p must lie strictly in (0,1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
            (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
              133.14166789178437745) * r + 3.387132872796366608) /
            (((((((5226.495278852545703 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
              42.313330701600911252) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
    }
    return (q < 0.0) ? -x : x;
}

namespace detail {

// Gauss-Legendre abscissae/weights used by bvn_upper below (6/12/20 points,
// stored as the positive half).
inline constexpr double bvn_x6[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
inline constexpr double bvn_w6[3] = {0.1713244923791703, 0.3607615730481384, 0.4679139345726910};
inline constexpr double bvn_x12[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                      0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
inline constexpr double bvn_w12[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                      0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
inline constexpr double bvn_x20[10] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                       0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                       0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                       0.07652652113349733};
inline constexpr double bvn_w20[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                       0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                                       0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                                       0.1527533871307259};

/// P(X > h, Y > k) for a standard bivariate normal pair with correlation r.
/// Drezner-Wesolowsky quadrature in Genz's arrangement; absolute accuracy
/// around 5e-16 for |r| < 1.
inline double bvn_upper(double h, double k, double r) {
    constexpr double twopi = 6.283185307179586477;
    const double* x;
    const double* w;
    int lg;
    const double ar = std::fabs(r);
    if (ar < 0.3)       { x = bvn_x6;  w = bvn_w6;  lg = 3; }
    else if (ar < 0.75) { x = bvn_x12; w = bvn_w12; lg = 6; }
    else                { x = bvn_x20; w = bvn_w20; lg = 10; }

    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        if (ar > 0.0) {
            const double hs = 0.5 * (h * h + k * k);
            const double asr = std::asin(r);
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double sn = std::sin(asr * (is * x[i] + 1.0) * 0.5);
                    bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn = bvn * asr / (2.0 * twopi);
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }
    if (r < 0.0) { k = -k; hk = -hk; }
    if (ar < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        double asr = -(bs / as + hk) / 2.0;
        if (asr > -100.0)
            bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (-hk < 100.0) {
            const double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * sqrt_2pi * norm_cdf(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (int i = 0; i < lg; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                const double t = a * (is * x[i] + 1.0);
                const double xs = t * t;
                const double rs = std::sqrt(1.0 - xs);
                asr = -(bs / xs + hk) / 2.0;
                if (asr > -100.0) {
                    bvn += a * w[i] * std::exp(asr) *
                           (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / twopi;
    }
    if (r > 0.0) return bvn + norm_cdf(-std::max(h, k));
    bvn = -bvn;
    if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    return bvn;
}

} // namespace detail

/// P(X <= x, Y <= y) for a standard bivariate normal pair with correlation rho.
inline double bvn_cdf(double x, double y, double rho) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::domain_error("bvn_cdf: rho must lie strictly in (-1,1)");
    return detail::bvn_upper(-x, -y, rho);
}

} // namespace copsurv::math
