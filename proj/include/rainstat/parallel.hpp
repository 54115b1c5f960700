#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace rainstat {

/// Process-wide default worker count used by grid operations (>= 1).
unsigned default_workers() noexcept;
void set_default_workers(unsigned n) noexcept;

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to `workers`
/// threads. Chunking never changes what body computes for an index, so
/// callers that write disjoint outputs per index get partition-independent
/// results. The first exception thrown by any chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
  workers = std::max(1u, workers);
  const std::size_t chunks = std::min<std::size_t>(workers, n);
  if (chunks <= 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    pool.emplace_back([&, c, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  parallel_for(n, default_workers(), std::forward<Body>(body));
}

}  // namespace rainstat
