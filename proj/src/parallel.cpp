#include "sacnet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace sacnet {

namespace {
std::atomic<int> g_threads{1};
}  // namespace

void set_num_threads(int threads) { g_threads = std::max(1, threads); }

int num_threads() { return g_threads; }

void parallel_for(int64_t count, const std::function<void(int64_t)>& fn) {
  const int64_t lanes = std::min<int64_t>(g_threads, count);
  if (lanes <= 1) {
    for (int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(lanes - 1);
  const int64_t chunk = (count + lanes - 1) / lanes;
  auto run = [&](int64_t lane) {
    const int64_t begin = lane * chunk;
    const int64_t end = std::min(count, begin + chunk);
    for (int64_t i = begin; i < end; ++i) fn(i);
  };
  for (int64_t lane = 1; lane < lanes; ++lane) workers.emplace_back(run, lane);
  run(0);
  for (auto& t : workers) t.join();
}

}  // namespace sacnet
