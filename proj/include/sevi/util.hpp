#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace sevi {

inline unsigned default_threads() {
  if (const char* env = std::getenv("SEVI_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Fixed chunk size so the chunk boundaries (and therefore every floating-point
// reduction that sums per-chunk partials in chunk order) never depend on the
// thread count.
inline constexpr std::size_t kParallelChunk = 256;

// body(begin, end) over [0, n) in fixed chunks; chunk order is the index order
// of the chunks, whatever thread ran them.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t chunk = kParallelChunk) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      body(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::vector<std::thread> pool;
  const unsigned workers = std::min<std::size_t>(threads, n_chunks);
  pool.reserve(workers);
  std::atomic<std::size_t> next{0};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= n_chunks) return;
        body(c * chunk, std::min(n, (c + 1) * chunk));
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sevi
