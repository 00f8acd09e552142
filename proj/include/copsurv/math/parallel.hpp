#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace copsurv::math {

/// Run body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to pre-sized storage indexed by i so the output is identical for
/// any thread count. The first exception is captured and rethrown.
template <typename Body>
void parallel_for(std::size_t n, int threads, const Body& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(error);
}

} // namespace copsurv::math
