#ifndef SFE_DETAIL_PARALLEL_HPP
#define SFE_DETAIL_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace sfe::detail {

/// Worker cap from SFE_THREADS; defaults to serial execution.
inline int maxThreads() {
    const char* env = std::getenv("SFE_THREADS");
    if (!env)
        return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

/// Index-parallel loop. Each index is processed exactly once; callers write
/// to per-index slots so results are identical for any thread count.
template <typename F>
void parallelFor(int n, F&& f) {
    const int nt = std::min(maxThreads(), n);
    if (nt <= 1) {
        for (int i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                f(i);
        });
    for (auto& th : pool)
        th.join();
}

} // namespace sfe::detail

#endif
