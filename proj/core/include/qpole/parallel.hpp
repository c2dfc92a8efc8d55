#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qpole {

inline unsigned default_workers() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Static-partition parallel loop. Work item i must write only to slot i of
// whatever output it owns; callers reduce the slots sequentially afterwards,
// which keeps results bit-identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn &&fn) {
    if (n == 0) {
        return;
    }
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const unsigned used = static_cast<unsigned>(
        std::min<std::size_t>(workers, n));
    std::vector<std::thread> pool;
    pool.reserve(used);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < used; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += used) {
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace qpole
