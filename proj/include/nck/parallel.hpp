#pragma once

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace nck {

// Worker cap for data-parallel sections: NCK_THREADS when set (minimum 1),
// otherwise the hardware concurrency.
inline unsigned worker_thread_cap() {
    if (const char* env = std::getenv("NCK_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return unsigned(parsed);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? hw : 1;
}

// Runs fn(i) for i in [0, n) across up to worker_thread_cap() threads.
// Callers are responsible for making iterations independent; results must
// not depend on the schedule.
inline void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(worker_thread_cap(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace nck
