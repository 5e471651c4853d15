#include "rmtu/parallel.hpp"

namespace rmtu::parallel {

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned n) { g_threads.store(n, std::memory_order_relaxed); }

unsigned thread_count() {
  const unsigned n = g_threads.load(std::memory_order_relaxed);
  if (n != 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace rmtu::parallel
