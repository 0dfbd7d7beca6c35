#include <chrono>
#include <cstdio>

#include "metachain/netsim.hpp"
#include <omp.h>

using namespace metachain;

int main(int argc, char** argv) {
  const int seeds = argc > 1 ? std::atoi(argv[1]) : 1;
  std::vector<SweepPoint> grid;
  for (int s = 1; s <= seeds; ++s)
    for (double fr : {0.0, 0.1, 0.2, 0.3})
      for (auto hw : {HardwareClass::Large, HardwareClass::Small})
        for (int n : {10, 20, 30, 40, 50})
          for (auto k : kAllKinds) {
            SweepPoint p;
            p.scenario = "bench";
            p.network.node_count = n;
            p.network.fault_ratio = fr;
            p.network.hw = hw;
            p.network.seed = static_cast<std::uint64_t>(s);
            p.engine = k;
            grid.push_back(p);
          }

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  const auto serial = sweep_serial(grid);
  auto t1 = clock::now();
  const auto parallel = sweep(grid);
  auto t2 = clock::now();

  const double ts = std::chrono::duration<double>(t1 - t0).count();
  const double tp = std::chrono::duration<double>(t2 - t1).count();
  const bool same = metrics_csv(serial) == metrics_csv(parallel);
  std::printf("points=%zu threads=%d serial=%.3fs parallel=%.3fs speedup=%.2fx identical=%s\n", grid.size(),
              omp_get_max_threads(), ts, tp, tp > 0 ? ts / tp : 0.0, same ? "yes" : "no");
  return same ? 0 : 1;
}
