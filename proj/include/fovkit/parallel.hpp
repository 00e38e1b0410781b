#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace fovkit {

// Index-parallel loop over [0, count). Each index is processed exactly once;
// callers must make fn(i) write only to index-owned slots so results are
// identical for any worker count.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = jobs <= 0 ? static_cast<int>(hw)
                                : std::min<int>(jobs, static_cast<int>(hw));
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace fovkit
