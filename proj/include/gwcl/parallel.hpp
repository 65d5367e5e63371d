#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace gwcl {

/// Number of worker threads to use: `requested` if positive, otherwise
/// the hardware concurrency (at least 1).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run `body(begin, end)` over contiguous chunks of [0, n) on `threads`
/// workers. Chunks are disjoint, so the body may write to per-index slots
/// without synchronization. Falls back to a direct call when single-threaded.
inline void parallel_chunks(std::int64_t n, int threads,
                            const std::function<void(std::int64_t, std::int64_t)>& body) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n <= 1) {
    if (n > 0) body(0, n);
    return;
  }
  const std::int64_t nthreads = std::min<std::int64_t>(threads, n);
  const std::int64_t chunk = (n + nthreads - 1) / nthreads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (std::int64_t t = 0; t < nthreads; ++t) {
    const std::int64_t begin = t * chunk;
    const std::int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace gwcl
