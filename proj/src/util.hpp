#pragma once

// Internal helpers shared by the library sources.

#include "joinsketch/types.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>
#include <vector>

namespace joinsketch::detail {

inline Index ceil_index(double x) { return static_cast<Index>(std::ceil(x - 1e-9)); }

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<Index>(threads, n));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (Index i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace joinsketch::detail
