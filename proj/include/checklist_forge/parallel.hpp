#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace checklist_forge {

/// Calls fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception stops further dispatch and is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    const std::size_t threads = std::min<std::size_t>(n, workers < 1 ? 1 : static_cast<std::size_t>(workers));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mu;

    auto worker = [&] {
        for (;;) {
            if (stop.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace checklist_forge
