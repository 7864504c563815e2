#pragma once

// Optional worker pool for embarrassingly parallel index loops. Workers
// write to disjoint per-index slots and never reduce, so results are
// byte-identical for any worker count. Thread count comes from EVS_THREADS
// (default 1).

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace evs {

inline int env_thread_count() {
    const char* s = std::getenv("EVS_THREADS");
    if (!s) return 1;
    int n = std::atoi(s);
    if (n < 1) return 1;
    if (n > 64) return 64;
    return n;
}

/// Run fn(i) for i in [0, n) on the worker pool; fn must only touch state
/// owned by index i.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
    int workers = env_thread_count();
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    if (workers > n) workers = n;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += workers) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace evs
