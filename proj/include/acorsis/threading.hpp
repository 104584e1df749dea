#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace acorsis {

inline int hardware_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Resolve a worker count: explicit request wins, then ACORSIS_THREADS, then
/// the hardware count. Always at least 1.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ACORSIS_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<int>(std::min<long>(v, 1024));
    }
    return hardware_threads();
}

/// Run body(begin_i, end_i, worker_id) over a static block partition of
/// [begin, end). Blocks are contiguous and assigned by worker id, so output
/// written by index is independent of scheduling. Rethrows the first worker
/// exception after all workers join.
template <class Body>
void parallel_blocks(int begin, int end, int nthreads, Body&& body) {
    const int total = end - begin;
    if (total <= 0) return;
    nthreads = std::max(1, std::min(nthreads, total));
    if (nthreads == 1) {
        body(begin, end, 0);
        return;
    }
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> workers;
    workers.reserve(nthreads);
    const int chunk = (total + nthreads - 1) / nthreads;
    for (int t = 0; t < nthreads; ++t) {
        const int lo = begin + t * chunk;
        const int hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&, lo, hi, t] {
            try {
                body(lo, hi, t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace acorsis
