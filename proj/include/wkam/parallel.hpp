#pragma once
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace wkam {

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(i) for i in [0,n) on a small thread pool. Each index is processed
/// exactly once; callers store results by index so reductions stay
/// deterministic regardless of scheduling.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::min(resolve_workers(workers), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace wkam
