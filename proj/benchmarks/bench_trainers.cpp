#include <benchmark/benchmark.h>

#include "saros/synth.hpp"
#include "saros/trainers.hpp"

using namespace saros;

namespace {

CorpusSplit bench_split() {
  SynthSpec spec;
  spec.n_users = 100;
  spec.n_items = 100;
  spec.k_true = 8;
  spec.interactions_per_user = 100;
  spec.positive_rate = 0.3;
  spec.noise_level = 0.1;
  spec.seed = 3;
  return chronological_split(generate(spec).corpus, {0.7});
}

}  // namespace

static void BM_SarosEpoch(benchmark::State& state) {
  const auto split = bench_split();
  const auto start = init_params(100, 100, 16, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.trace_every = 0;
  for (auto _ : state) {
    auto result = train_saros_b(split, start, {0.01}, cfg);
    benchmark::DoNotOptimize(result.trace.n_updates);
  }
}
BENCHMARK(BM_SarosEpoch);

static void BM_SarosMomentumEpoch(benchmark::State& state) {
  const auto split = bench_split();
  const auto start = init_params(100, 100, 16, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.trace_every = 0;
  for (auto _ : state) {
    auto result = train_saros_m(split, start, {0.01}, cfg);
    benchmark::DoNotOptimize(result.trace.n_updates);
  }
}
BENCHMARK(BM_SarosMomentumEpoch);

static void BM_BprBatchEpoch(benchmark::State& state) {
  const auto split = bench_split();
  const auto start = init_params(100, 100, 16, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.trace_every = 0;
  for (auto _ : state) {
    auto result = train_bpr_batch(split, start, {0.01}, cfg);
    benchmark::DoNotOptimize(result.trace.n_updates);
  }
}
BENCHMARK(BM_BprBatchEpoch);

static void BM_Bpr10kSamples(benchmark::State& state) {
  const auto split = bench_split();
  const auto start = init_params(100, 100, 16, 1);
  TrainConfig cfg;
  cfg.bpr_samples = 10000;
  cfg.trace_every = 0;
  for (auto _ : state) {
    auto result = train_bpr(split, start, {0.01}, cfg);
    benchmark::DoNotOptimize(result.trace.n_updates);
  }
}
BENCHMARK(BM_Bpr10kSamples);

BENCHMARK_MAIN();
