#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace heatlab {

/// Worker count: HEATLAB_THREADS if set, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("HEATLAB_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

/// Run body(i) for i in [0, n) across workers. Tasks are claimed through an
/// atomic counter; bodies must be independent (results keyed by index), so the
/// outcome does not depend on the schedule.
inline void parallel_for(long n, const std::function<void(long)>& body, int threads = 0) {
    if (threads <= 0) threads = worker_count();
    if (threads == 1 || n <= 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto work = [&] {
        for (;;) {
            long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mu);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    int nw = static_cast<int>(std::min<long>(threads, n));
    pool.reserve(nw);
    for (int t = 0; t < nw; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace heatlab
