#include <benchmark/benchmark.h>

#include "saros/model.hpp"

using namespace saros;

namespace {

ModelParams make_params(std::size_t n_items, std::size_t k) {
  ModelParams p(1, n_items, k);
  Rng rng(5);
  for (double& x : p.user_matrix()) x = rng.uniform(-1.0, 1.0);
  for (double& x : p.item_matrix()) x = rng.uniform(-1.0, 1.0);
  return p;
}

Block make_block(std::size_t n_pos, std::size_t n_neg) {
  Block b;
  b.user = 0;
  for (std::uint32_t i = 0; i < n_pos; ++i) b.positives.push_back(i);
  for (std::uint32_t j = 0; j < n_neg; ++j) b.negatives.push_back(n_pos + j);
  return b;
}

}  // namespace

static void BM_PairLoss(benchmark::State& state) {
  const auto params = make_params(2, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pair_loss(params, {0.01}, 0, 0, 1, +1));
  }
}
BENCHMARK(BM_PairLoss)->Arg(16)->Arg(64);

static void BM_BlockGradient(benchmark::State& state) {
  const std::size_t side = state.range(0);
  const auto params = make_params(2 * side, 16);
  const auto block = make_block(side, side);
  BlockGradient grad;
  for (auto _ : state) {
    block_gradient(params, {0.01}, block, grad);
    benchmark::DoNotOptimize(grad.loss);
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_BlockGradient)->Arg(1)->Arg(4)->Arg(16);

BENCHMARK_MAIN();
