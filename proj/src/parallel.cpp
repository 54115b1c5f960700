#include "rainstat/parallel.hpp"

#include <atomic>

namespace rainstat {

namespace {
std::atomic<unsigned> g_workers{1};
}

unsigned default_workers() noexcept { return g_workers.load(std::memory_order_relaxed); }

void set_default_workers(unsigned n) noexcept {
  g_workers.store(n == 0 ? 1 : n, std::memory_order_relaxed);
}

}  // namespace rainstat
