#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace rbdm {

// Splits [0, n) into at most `threads` contiguous chunks and runs
// f(begin, end, chunk_index) on each. Chunk boundaries depend only on
// (n, threads), so reductions done afterwards in chunk order are
// reproducible for a fixed thread count.
template <class F>
void parallel_chunks(int n, int threads, F&& f) {
    if (n <= 0) return;
    const int chunks = std::max(1, std::min(threads, n));
    if (chunks == 1) {
        f(0, n, 0);
        return;
    }
    const int per = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(chunks));
    for (int c = 0; c < chunks; ++c) {
        const int b = c * per;
        const int e = std::min(n, b + per);
        if (b >= e) break;
        pool.emplace_back([&f, b, e, c] { f(b, e, c); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace rbdm
