#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace evio {

/// Worker count from `requested`, overridden by EVIO_THREADS when set. Always >= 1.
int resolve_threads(int requested);

/// Splits [0, n) into at most `threads` contiguous chunks and runs fn(begin, end, chunk)
/// on each. Chunk boundaries depend only on n and threads, so callers that merge
/// per-chunk results in chunk order stay deterministic.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
  if (workers <= 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  const std::size_t step = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t c = 0; c < workers; ++c) {
    const std::size_t b = c * step;
    const std::size_t e = std::min(n, b + step);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e, c] { fn(b, e, c); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace evio
