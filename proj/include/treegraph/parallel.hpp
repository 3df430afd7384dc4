// Deterministic fork/join helpers. Work is split into contiguous chunks that
// write disjoint output slots, so results never depend on the thread count.
#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace treegraph {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Invokes fn(begin, end) over a static partition of [0, n).
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)), n);
  if (nthreads <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + nthreads - 1) / nthreads;
  std::vector<std::thread> workers;
  workers.reserve(nthreads - 1);
  for (std::size_t t = 1; t < nthreads; ++t) {
    const std::size_t begin = t * chunk;
    if (begin >= n) break;
    const std::size_t end = std::min(n, begin + chunk);
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& w : workers) w.join();
}

// Invokes fn(i) for every i in [0, n).
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  parallel_chunks(n, threads, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace treegraph
