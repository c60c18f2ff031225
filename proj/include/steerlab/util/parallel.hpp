#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace steerlab {

// Runs fn(0..count) on a bounded pool. Each index must write only its own
// output slot; completion order then cannot affect results.
inline void parallel_for_indexed(std::size_t count, std::size_t workers,
                                 const std::function<void(std::size_t)>& fn) {
    if (workers == 0) {
        workers = std::thread::hardware_concurrency();
        if (workers == 0) {
            workers = 1;
        }
    }
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n = std::min(workers, count);
    pool.reserve(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }
}

}  // namespace steerlab
