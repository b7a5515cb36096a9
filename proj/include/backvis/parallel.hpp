#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace backvis {

/// Static chunked parallel map over [0, n). Work items must be independent;
/// callers keep determinism by writing results into per-index slots and
/// reducing in fixed index order afterwards.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t n_threads = 0) {
    if (n_threads == 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, n);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += n_threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace backvis
