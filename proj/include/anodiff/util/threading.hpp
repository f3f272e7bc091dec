#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace anodiff {

inline int default_jobs() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Static partition of [0, n) into at most `jobs` contiguous chunks; chunk k is
// processed by worker k. Deterministic work assignment for a given `jobs`.
inline void parallel_chunks(int64_t n, int jobs,
                            const std::function<void(int chunk, int64_t begin, int64_t end)>& fn) {
    if (n <= 0) return;
    jobs = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(jobs, n)));
    if (jobs == 1) {
        fn(0, 0, n);
        return;
    }
    const int64_t base = n / jobs, rem = n % jobs;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs - 1));
    int64_t begin = 0;
    for (int k = 0; k < jobs; ++k) {
        const int64_t len = base + (k < rem ? 1 : 0);
        const int64_t end = begin + len;
        if (k == jobs - 1) {
            fn(k, begin, end);
        } else {
            pool.emplace_back([&fn, k, begin, end] { fn(k, begin, end); });
        }
        begin = end;
    }
    for (auto& t : pool) t.join();
}

}  // namespace anodiff
