// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace agentlab
{

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
/// visited exactly once; callers write results into slot i, so the outcome
/// does not depend on scheduling. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }

    auto next = std::atomic<std::size_t> { 0 };
    auto failure = std::exception_ptr {};
    auto failure_lock = std::mutex {};
    auto body = [&] {
        for (auto i = next.fetch_add(1); i < count; i = next.fetch_add(1))
        {
            try
            {
                fn(i);
            }
            catch (...)
            {
                auto guard = std::lock_guard(failure_lock);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    auto threads = std::vector<std::thread> {};
    threads.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t)
        threads.emplace_back(body);
    body();
    for (auto& t: threads)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

inline std::size_t default_workers()
{
    auto const n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

} // namespace agentlab
