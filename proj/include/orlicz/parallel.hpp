#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace orlicz {

/// Worker count from ORLICZ_LAB_THREADS (default 1, capped by the hardware).
inline int thread_count() {
    static const int n = [] {
        const char* env = std::getenv("ORLICZ_LAB_THREADS");
        if (!env) return 1;
        int v = std::atoi(env);
        const int hw = static_cast<int>(std::thread::hardware_concurrency());
        if (v < 1) v = 1;
        if (hw > 0 && v > hw) v = hw;
        return v;
    }();
    return n;
}

/// Index-parallel loop over [0, n).  Work is split into a fixed number of
/// chunks independent of the thread count, so chunk-local reductions combined
/// in chunk order stay bit-identical for any ORLICZ_LAB_THREADS.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int workers = thread_count();
    if (workers <= 1 || n < 128) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    constexpr std::size_t chunks = 64;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= chunks) return;
                const std::size_t lo = n * c / chunks;
                const std::size_t hi = n * (c + 1) / chunks;
                for (std::size_t i = lo; i < hi; ++i) body(i);
            }
        });
    for (auto& t : pool) t.join();
}

} // namespace orlicz
