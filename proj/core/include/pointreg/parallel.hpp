#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace pointreg {

namespace detail {
inline std::atomic<int> g_thread_count{0};
}

/// Global worker count for parallel_for. 0 means hardware concurrency.
inline void set_thread_count(int n) {
  detail::g_thread_count.store(n < 0 ? 0 : n);
}

inline int thread_count() {
  int n = detail::g_thread_count.load();
  if (n == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    n = hc > 0 ? static_cast<int>(hc) : 1;
  }
  return n;
}

/// Runs fn(i) for i in [begin, end). Work items must write to disjoint
/// slots; the result is then identical for any worker count.
inline void parallel_for(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t)>& fn) {
  const std::size_t n = end > begin ? end - begin : 0;
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pointreg
