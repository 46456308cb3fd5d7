#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace nlde {

/// Static block partition over [0, n): deterministic regardless of thread
/// count (workers own disjoint index ranges; results land in pre-sized
/// arrays, so reductions stay bitwise reproducible).
inline void parallel_for(long n, int threads, const std::function<void(long, long)>& body) {
    if (threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    threads = std::min<long>(threads, n);
    std::vector<std::thread> pool;
    long chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        long lo = t * chunk;
        long hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace nlde
