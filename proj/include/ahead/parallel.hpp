#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ahead {

/// Runs body(begin, end) over contiguous chunks of [0, n) on `threads`
/// workers. Chunk boundaries do not depend on the worker count, so any body
/// that writes only to its own indices produces identical results for every
/// thread count. The first exception thrown by a worker is rethrown.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body, std::size_t chunk = 4096) {
    if (n == 0) return;
    chunk = std::max<std::size_t>(1, chunk);
    const std::size_t chunks = (n + chunk - 1) / chunk;
    const int workers = static_cast<int>(
        std::min<std::size_t>(chunks, static_cast<std::size_t>(std::max(1, threads))));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = static_cast<std::size_t>(w); c < chunks;
                     c += static_cast<std::size_t>(workers)) {
                    body(c * chunk, std::min(n, (c + 1) * chunk));
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, never on how they were produced.
inline double pairwise_sum(const double* values, std::size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace ahead
