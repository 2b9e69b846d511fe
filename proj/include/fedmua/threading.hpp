#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace fedmua {

// Runs fn(i) for i in [0, n). Work items must be independent; results should
// be written to index-addressed slots so scheduling cannot affect outputs.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t max_workers = 0) {
    if (n == 0) return;
    std::size_t workers = max_workers ? max_workers : std::thread::hardware_concurrency();
    if (workers < 2 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    workers = std::min(workers, n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace fedmua
