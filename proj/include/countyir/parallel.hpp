#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace countyir {
namespace detail {

// Runs work(0..n_jobs-1) over a small thread pool. Jobs must write only to
// their own pre-allocated slots; the first exception wins and is rethrown
// after all workers finish.
inline void run_indexed(int n_jobs, int threads, const std::function<void(int)>& work) {
    threads = std::max(1, std::min(threads, n_jobs));
    if (threads == 1) {
        for (int i = 0; i < n_jobs; ++i) work(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_jobs) return;
                try {
                    work(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& thread : pool) thread.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail
}  // namespace countyir
