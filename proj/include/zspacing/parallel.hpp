#pragma once
#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace zspacing {

// Worker count resolution: 0 means "use the hardware concurrency".
[[nodiscard]] inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for every i in [0, n) over a static partition of the index
// range.  Each index is processed by exactly one worker and each worker scans
// its range in ascending order, so bodies that write disjoint slots and keep
// a fixed per-index accumulation order produce results that do not depend on
// the thread count.  The first exception (by ascending index range) is
// rethrown after all workers have joined.
template <class Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
    if (n <= 0) return;
    threads = resolve_threads(threads);
    if (threads <= 1 || n == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        const std::int64_t lo = n * t / workers;
        const std::int64_t hi = n * (t + 1) / workers;
        pool.emplace_back([lo, hi, t, &fn, &errors] {
            try {
                for (std::int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

} // namespace zspacing
