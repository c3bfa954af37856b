#pragma once

#include <cstdint>
#include <thread>
#include <vector>
#include <functional>

namespace ghoststat {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Splits [0, count) into one contiguous chunk per worker and runs
// fn(worker, begin, end) on each. Worker w always receives the same
// chunk for a given (count, workers), so results are reproducible for
// a fixed worker count.
inline void parallel_chunks(std::uint64_t count, int workers,
                            const std::function<void(int, std::uint64_t, std::uint64_t)>& fn) {
    workers = resolve_threads(workers);
    if (std::uint64_t(workers) > count && count > 0) workers = int(count);
    if (workers <= 1) {
        fn(0, 0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) {
        const std::uint64_t b = count * std::uint64_t(w) / std::uint64_t(workers);
        const std::uint64_t e = count * std::uint64_t(w + 1) / std::uint64_t(workers);
        pool.emplace_back([&fn, w, b, e] { fn(w, b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace ghoststat
