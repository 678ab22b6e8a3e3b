#include <benchmark/benchmark.h>

#include <vector>

#include "saros/common.hpp"
#include "saros/memory.hpp"

using namespace saros;

static void BM_Periodogram(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> x(state.range(0));
  for (double& v : x) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(periodogram(x));
  }
}
BENCHMARK(BM_Periodogram)->Arg(256)->Arg(4096)->Arg(4095);  // non-power-of-2 too

static void BM_GphEstimate(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> x(state.range(0));
  for (double& v : x) v = rng.normal();
  const auto m = static_cast<std::uint32_t>(std::sqrt(double(x.size())));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gph_estimate(x, m));
  }
}
BENCHMARK(BM_GphEstimate)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
