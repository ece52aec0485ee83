#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace gf {

// Worker count: GROOVEFORGE_THREADS if set, else hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv("GROOVEFORGE_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(begin, end) over [0, n) split into fixed-size chunks pulled from an
// atomic counter. Chunk boundaries depend only on n and chunk_size, so callers
// that keep per-chunk partial results and reduce them in chunk order get
// results independent of the worker count.
inline void parallel_chunks(std::int64_t n, std::int64_t chunk_size,
                            const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  chunk_size = std::max<std::int64_t>(1, chunk_size);
  const std::int64_t n_chunks = (n + chunk_size - 1) / chunk_size;
  const int workers = std::min<std::int64_t>(thread_count(), n_chunks);

  if (workers <= 1) {
    for (std::int64_t c = 0; c < n_chunks; ++c) {
      const std::int64_t b = c * chunk_size;
      fn(c, b, std::min(n, b + chunk_size));
    }
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;

  auto work = [&]() {
    for (;;) {
      const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= n_chunks || failed.load(std::memory_order_relaxed)) return;
      const std::int64_t b = c * chunk_size;
      try {
        fn(c, b, std::min(n, b + chunk_size));
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int i = 0; i < workers - 1; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failed && first_error) std::rethrow_exception(first_error);
}

// Simple index-parallel loop, no reduction.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn,
                         std::int64_t grain = 1024) {
  parallel_chunks(n, grain, [&](std::int64_t, std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace gf
