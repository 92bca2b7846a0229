#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace oac3::detail {

inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested == 0) return std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return requested;
}

/// Runs body(begin, end) over contiguous chunks of [0, count). Workers join
/// before returning; the first exception thrown by a worker is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body)
{
    const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        body(std::size_t{0}, count);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&, begin, end] {
                try {
                    body(begin, end);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace oac3::detail
