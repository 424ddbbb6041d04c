#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mf {

namespace detail {
inline std::atomic<int>& thread_count_setting() {
  static std::atomic<int> count{1};
  return count;
}
}  // namespace detail

/// Process-wide worker count for the data-parallel kernels. Results never depend on it:
/// every kernel writes disjoint outputs per index and reduces in a fixed order.
inline void set_num_threads(int n) {
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  detail::thread_count_setting().store(n);
}

inline int num_threads() { return detail::thread_count_setting().load(); }

/// Calls fn(i) for every i in [begin, end). Indices are split into contiguous ranges,
/// one per worker; fn must only write state owned by index i.
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
  const int n = end - begin;
  if (n <= 0) return;
  const int workers = std::min(num_threads(), n);
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run_range = [&](int lo, int hi) {
    try {
      for (int i = lo; i < hi; ++i) fn(i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(run_range, lo, hi);
  }
  run_range(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mf
