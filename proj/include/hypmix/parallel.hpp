#pragma once

// Work distribution over a fixed set of independent streams. Threads claim
// stream indices from an atomic counter; results are stored per stream and
// merged afterwards in stream order, so the outcome does not depend on the
// number of threads or on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hypmix {

// Thread count from HYPMIX_THREADS, else the hardware concurrency.
inline unsigned default_threads() {
    if (const char* env = std::getenv("HYPMIX_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1 && v <= 4096) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

template <class Result, class Fn>
std::vector<Result> map_streams(std::size_t n_streams, unsigned threads, Fn&& fn) {
    std::vector<Result> results(n_streams);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_streams) return;
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n_streams);
                return;
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n_streams, 1))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

}  // namespace hypmix
