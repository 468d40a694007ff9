#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mosaic {

// Process-wide worker count. 0 means "use hardware concurrency".
inline int& thread_count() {
  static int n = 0;
  return n;
}

inline int effective_threads() {
  int n = thread_count();
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, n);
}

// Runs fn(begin, end) over disjoint blocks of [0, n); used by hot loops
// where per-index dispatch overhead would dominate.
template <typename Fn>
void parallel_blocks(std::size_t n, std::size_t grain, Fn&& fn) {
  const int workers = effective_threads();
  if (workers <= 1 || n <= grain) {
    if (n) fn(std::size_t{0}, n);
    return;
  }
  const std::size_t blocks = (n + grain - 1) / grain;
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  int use = std::min<std::size_t>(workers, blocks);
  pool.reserve(use);
  for (int w = 0; w < use; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t b = next.fetch_add(1);
        if (b >= blocks) return;
        std::size_t begin = b * grain;
        fn(begin, std::min(n, begin + grain));
      }
    });
  }
  for (auto& t : pool) t.join();
}

// Runs fn(i) for i in [0, n). Work items must be independent; each item
// writes only to its own slots so results are identical to the serial order.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int workers = std::min<std::size_t>(effective_threads(), n);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace mosaic
