#include "meshalign/parallel.hpp"

#include <atomic>

namespace meshalign {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int count) {
  if (count <= 0) {
    count = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  g_threads.store(count);
}

int thread_count() { return g_threads.load(); }

} // namespace meshalign
