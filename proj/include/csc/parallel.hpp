#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace csc {

/// Calls f(i) for i in [0, n) on up to `jobs` threads. Results must be written
/// by index, so the outcome never depends on scheduling. The first exception
/// thrown by any task is rethrown on the calling thread.
template<typename F>
void parallel_for(std::size_t n, int jobs, F && f)
{
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) { f(i); }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) { error = std::current_exception(); }
        }
      }
    });
  }
  pool.clear();
  if (error) { std::rethrow_exception(error); }
}

}  // namespace csc
