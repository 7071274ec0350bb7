#pragma once

#include <atomic>
#include <thread>
#include <vector>

#include "ring.hpp"

namespace pdcrys {

// Worker count for block-parallel loops; set once at startup.  Results are
// written into per-index slots, so the output is identical for any count.
inline int& global_thread_count() {
  static int n = 1;
  return n;
}

template <class F>
void parallel_for(u64 n, F&& f) {
  int T = global_thread_count();
  if (T <= 1 || n <= 1) {
    for (u64 i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<u64> next{0};
  std::vector<std::thread> pool;
  int workers = T < int(n) ? T : int(n);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (u64 i; (i = next.fetch_add(1)) < n;) f(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace pdcrys
