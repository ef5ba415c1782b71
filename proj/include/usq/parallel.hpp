// parallel.hpp: index-parallel loop over a fixed worker pool.
//
// Work items are claimed through an atomic counter and each item writes only
// its own output slot, so results are independent of the worker count.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace usq {

/// Explicit request, else USQ_WORKERS, else hardware concurrency (at least 1).
inline int resolve_workers(std::optional<int> requested = std::nullopt) {
    if (requested && *requested > 0) {
        return *requested;
    }
    if (const char* env = std::getenv("USQ_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
            // fall through to the hardware default
        }
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n). The first exception thrown by any item is
/// rethrown after all workers have stopped.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    const auto count = static_cast<std::size_t>(std::max(1, workers));
    if (count == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(std::min(count, n));
        for (std::size_t w = 0; w < std::min(count, n); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        const std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                        failed = true;
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace usq
