#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dpfilm {

// jobs <= 0: DPFILM_THREADS, else hardware concurrency
inline int resolve_jobs(int jobs)
{
    if (jobs > 0) return jobs;
    if (const char* e = std::getenv("DPFILM_THREADS")) {
        int n = std::atoi(e);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is claimed from
// a shared counter; callers write results into slot i, so the merge order
// does not depend on scheduling. The first exception is rethrown.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn)
{
    jobs = std::min(std::max(jobs, 1), std::max(n, 1));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!err) err = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace dpfilm
