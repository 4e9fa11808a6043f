#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pasdf {

/// Worker cap: explicit override if set, else PASDF_THREADS, else hardware concurrency.
std::size_t thread_count();

/// Override the worker cap for this process (0 restores the environment default).
void set_thread_count(std::size_t n);

/// Runs fn(i) for every i in [0, n). Work is split into contiguous ranges; callers
/// write per-index outputs and reduce them afterwards in index order, which keeps
/// results independent of the worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_grain = 64) {
  const std::size_t workers =
      std::min(thread_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_grain)));
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pasdf
