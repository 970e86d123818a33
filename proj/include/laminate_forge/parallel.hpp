#pragma once

#include <algorithm>
#include <cstdlib>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace lamf {

/// Worker count: LAMINATE_FORGE_THREADS if set (clamped to >= 1),
/// otherwise the hardware concurrency.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("LAMINATE_FORGE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(index) for index = 0..count-1 on contiguous chunks, one task
/// per worker. Callers keep determinism by writing results into
/// preallocated slots; exceptions propagate from the joins.
template <class F>
inline void parallel_for(std::size_t count, F&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, thread_budget()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::future<void>> tasks;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        tasks.push_back(std::async(std::launch::async, [lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        }));
    }
    for (auto& t : tasks) t.get();
}

}  // namespace lamf
