#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace copsurv::math {

namespace detail {

// Count inversions by merge sort, O(n log n).
inline std::uint64_t count_inversions(std::vector<double>& a, std::vector<double>& buf,
                                      std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(a, buf, lo, mid) + count_inversions(a, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[j] < a[i]) {
            inv += mid - i;
            buf[k++] = a[j++];
        } else {
            buf[k++] = a[i++];
        }
    }
    while (i < mid) buf[k++] = a[i++];
    while (j < hi) buf[k++] = a[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

} // namespace detail

/// Kendall's tau for continuous data (no tie handling): sort by x, count
/// inversions of the y sequence; tau = 1 - 4 I / (n (n-1)).
inline double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("kendall_tau: need two vectors of equal size >= 2");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const std::uint64_t inv = detail::count_inversions(ys, buf, 0, n);
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return 1.0 - 2.0 * static_cast<double>(inv) / pairs;
}

} // namespace copsurv::math
