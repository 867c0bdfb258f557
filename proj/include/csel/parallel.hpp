#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace csel {

inline int resolve_threads(int threads, size_t n) {
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return static_cast<int>(
      std::min<size_t>(static_cast<size_t>(threads), std::max<size_t>(n, 1)));
}

// Splits [0, n) into contiguous chunks, one worker per chunk. fn(begin, end)
// must be pure per index so the split cannot affect results.
template <class Fn>
void parallel_chunks(size_t n, int threads, Fn&& fn) {
  threads = resolve_threads(threads, n);
  if (threads <= 1 || n < 2048) {
    fn(static_cast<size_t>(0), n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const size_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const size_t begin = t * chunk;
    const size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& w : workers) w.join();
}

}  // namespace csel
