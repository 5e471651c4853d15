#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace rmtu::parallel {

/// Worker count used by for_each_index; 0 selects hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

namespace detail {
// Set while a thread executes for_each_index work; nested loops then run
// inline instead of spawning another pool.
inline thread_local bool in_worker = false;

struct WorkerScope {
  bool saved = in_worker;
  WorkerScope() { in_worker = true; }
  ~WorkerScope() { in_worker = saved; }
};
}  // namespace detail

/// Runs fn(i) for i in [0, count). Work items must write only to their own
/// output slot and draw randomness from streams derived from i; results are
/// then independent of the worker count. If several items throw, the
/// exception of the lowest index is rethrown.
template <class Fn>
void for_each_index(std::size_t count, Fn&& fn) {
  const std::size_t workers =
      detail::in_worker ? 1 : std::min<std::size_t>(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;
  auto work = [&] {
    detail::WorkerScope scope;
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rmtu::parallel
