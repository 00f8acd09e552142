#pragma once

#include <cstdint>

namespace copsurv::math {

/// splitmix64 step; also used to derive independent streams from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic seed for stream (a, b) of a master seed. Counter-based, so
/// replicate r of a study/bootstrap gets the same stream no matter how many
/// threads run it or in what order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    (void)splitmix64(s);
    s ^= a * 0xD6E8FEB86659FD93ULL;
    (void)splitmix64(s);
    s ^= b * 0xCA5A826395121157ULL;
    return splitmix64(s);
}

/// xoshiro-free minimal generator: splitmix64 driven by its own counter.
/// Passes the statistical needs here (inverse-CDF sampling) and is trivially
/// reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform on the open interval (0,1): (x >> 11) + 0.5 scaled by 2^-53,
    /// so 0 and 1 are unreachable and quantile transforms stay finite.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Uniform integer in [0, n) by rejection (unbiased, platform-stable).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * (0xFFFFFFFFFFFFFFFFULL / n);
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

private:
    std::uint64_t state_;
};

} // namespace copsurv::math
