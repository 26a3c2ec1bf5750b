#pragma once

// Minimal static-partition parallel loop. Work items write disjoint outputs,
// so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nullkirch {

inline int& worker_count() {
  static int n = [] {
    if (const char* env = std::getenv("NULLKIRCH_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return 1;
  }();
  return n;
}

inline void set_worker_count(int n) { worker_count() = std::max(1, n); }

template <class F>
void parallel_for(int count, F&& body) {
  const int nw = std::min(worker_count(), std::max(1, count));
  if (nw <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace nullkirch
