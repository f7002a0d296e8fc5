#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace renovor {

namespace detail {

inline int default_thread_count()
{
  if (const char *env = std::getenv("RENOVOR_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::atomic<int> &thread_cap()
{
  static std::atomic<int> cap{default_thread_count()};
  return cap;
}

} // namespace detail

inline int thread_count() { return detail::thread_cap().load(); }

inline void set_thread_count(int n) { detail::thread_cap().store(std::max(1, n)); }

/// Runs fn(i) for i in [begin, end) split into contiguous chunks, one per
/// worker. Callers only write to per-index outputs, so the result does not
/// depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn &&fn)
{
  if (end <= begin) return;
  const std::size_t n = end - begin;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n / 1024 + 1);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto &t : pool) t.join();
}

} // namespace renovor
