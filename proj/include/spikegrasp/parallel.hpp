#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace spikegrasp {

// Worker cap: SPIKEGRASP_THREADS, else hardware concurrency (at least 1).
inline int worker_count() {
  if (const char* env = std::getenv("SPIKEGRASP_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition over [0, n). Each index is processed exactly once
// and writes to disjoint slots, so results are schedule-independent.
inline void parallel_for(int n, const std::function<void(int)>& body) {
  int workers = worker_count();
  if (workers <= 1 || n < 2 * workers) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int lo = w * chunk;
    int hi = lo + chunk < n ? lo + chunk : n;
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace spikegrasp
