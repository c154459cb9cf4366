#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace meshalign {

/// Process-wide worker count used by parallel_for; 1 means run inline.
void set_thread_count(int count);
int thread_count();

/// Calls fn(i) for i in [0, n) split into contiguous blocks, one per worker.
/// Callers write to disjoint slots, so results do not depend on the count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([&fn, begin, end] {
      for (int i = begin; i < end; ++i) {
        fn(i);
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
}

} // namespace meshalign
