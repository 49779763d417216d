#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace polysrc {

/// Default worker count: POLYSRC_THREADS if set, else hardware concurrency.
int default_threads();

/// Runs fn(i) for i in [begin, end) on up to `threads` workers, static
/// contiguous chunks. The first exception thrown by a worker is rethrown.
template <class Fn>
void parallel_for(size_t begin, size_t end, int threads, Fn&& fn) {
  if (end <= begin) return;
  const size_t count = end - begin;
  const size_t workers = std::max<size_t>(1, std::min<size_t>(threads, count));
  if (workers == 1) {
    for (size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    const size_t lo = begin + count * w / workers;
    const size_t hi = begin + count * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      try {
        for (size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace polysrc
