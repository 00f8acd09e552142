#pragma once

#include <algorithm>
#include <cmath>

// Small log-space helpers used by the copula evaluations, where products of
// exponentials with wildly different magnitudes would otherwise under/overflow.

namespace copsurv::math {

/// log(1 + e^x), accurate for x of either sign and any magnitude.
inline double softplus(double x) {
    if (x > 36.0) return x + std::exp(-x); // e^{-x} keeps ~1 ulp for x in (36, 745]
    if (x < -36.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

/// log(1 - e^{-x}) for x > 0.
inline double log1mexp(double x) {
    constexpr double ln2 = 0.6931471805599453;
    if (x <= ln2) return std::log(-std::expm1(-x));
    return std::log1p(-std::exp(-x));
}

/// log(e^a + e^b) without overflow.
inline double logsumexp2(double a, double b) {
    if (a < b) std::swap(a, b);
    if (!std::isfinite(a)) return a; // covers -inf + -inf and +inf
    return a + std::log1p(std::exp(b - a));
}

} // namespace copsurv::math
