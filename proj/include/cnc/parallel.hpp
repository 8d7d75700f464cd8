#ifndef CNC_PARALLEL_HPP
#define CNC_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace cnc {

/// Worker cap: NCUT_THREADS if set and positive, else hardware concurrency.
inline unsigned thread_limit() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NCUT_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(std::min<long>(v, 1024));
        } catch (...) {
        }
    }
    return hw;
}

/// Runs fn(i) for i in [0, n). Each index must write only its own output slot;
/// results are then independent of the schedule.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_per_thread = 64) {
    const std::size_t workers =
        std::min<std::size_t>(thread_limit(), std::max<std::size_t>(1, n / min_per_thread));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace cnc

#endif  // CNC_PARALLEL_HPP
