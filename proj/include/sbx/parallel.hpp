#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace sbx {

/// Run `count` independent replica jobs on up to `workers` threads.
/// Job i writes slot i of the result vector, so the merged output is
/// identical for every worker count; all randomness must come from the
/// replica index, never from scheduling.
template <typename T>
std::vector<T> run_replicas(int count, int workers, const std::function<T(int)>& job) {
    std::vector<T> results(static_cast<std::size_t>(count));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = job(i);
        return results;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                results[static_cast<std::size_t>(i)] = job(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(error);
    return results;
}

} // namespace sbx
