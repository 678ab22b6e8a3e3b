#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "saros/synth.hpp"
#include "saros/trainers.hpp"
#include "test_helpers.hpp"

using namespace saros;

namespace {

bool params_equal(const ModelParams& a, const ModelParams& b) {
  return a.same_shape(b) &&
         std::equal(a.user_matrix().begin(), a.user_matrix().end(), b.user_matrix().begin()) &&
         std::equal(a.item_matrix().begin(), a.item_matrix().end(), b.item_matrix().begin());
}

double max_abs_diff(const ModelParams& a, const ModelParams& b) {
  double m = 0.0;
  for (std::size_t n = 0; n < a.user_matrix().size(); ++n) {
    m = std::max(m, std::abs(a.user_matrix()[n] - b.user_matrix()[n]));
  }
  for (std::size_t n = 0; n < a.item_matrix().size(); ++n) {
    m = std::max(m, std::abs(a.item_matrix()[n] - b.item_matrix()[n]));
  }
  return m;
}

}  // namespace

TEST_CASE("saros_b: a trainable user that forms no block leaves params untouched") {
  // view A then click A: both labels present, no block ever completes
  std::vector<Interaction> rows{{0, 0, 0, -1}, {0, 0, 1, 1}};
  auto split = testutil::all_train_split(Corpus(1, 2, std::move(rows)));
  REQUIRE(split.trainable[0] == 1);
  const auto start = init_params(1, 2, 4, 3);
  TrainConfig cfg;
  cfg.b_min = 0;
  cfg.b_max = 5;
  const auto result = train_saros_b(split, start, {0.0}, cfg);
  CHECK(params_equal(result.params, start));
  CHECK(result.trace.n_updates == 0);
}

TEST_CASE("saros_b: below b_min the user's updates are rolled back bitwise") {
  // one block only; with b_min = 2 the update must be undone exactly
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1, 1, 1}));
  const auto start = init_params(1, 4, 8, 17);
  TrainConfig cfg;
  cfg.b_min = 2;
  cfg.b_max = 10;
  const auto result = train_saros_b(split, start, {0.01}, cfg);
  CHECK(result.trace.n_updates == 1);  // the update happened ...
  CHECK(params_equal(result.params, start));  // ... and was undone bitwise
}

TEST_CASE("saros_b: one user, one block, one pair equals a hand-applied step") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1}));
  const auto start = init_params(1, 2, 4, 23);
  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.b_min = 1;
  cfg.b_max = 1;
  const auto result = train_saros_b(split, start, {0.02}, cfg);

  Block b;
  b.user = 0;
  b.negatives = {0};
  b.positives = {1};
  ModelParams expected = start;
  const auto g = block_gradient(expected, {0.02}, b);
  for (std::size_t d = 0; d < 4; ++d) expected.user(0)[d] -= cfg.eta * g.user_grad[d];
  for (const auto& [item, grad] : g.item_grads) {
    for (std::size_t d = 0; d < 4; ++d) expected.item(item)[d] -= cfg.eta * grad[d];
  }
  CHECK(params_equal(result.params, expected));
}

TEST_CASE("saros_b: no user contributes more than b_max updates per epoch") {
  std::vector<int> labels;
  for (int j = 0; j < 30; ++j) labels.push_back(j % 2 ? 1 : -1);
  auto split = testutil::all_train_split(testutil::single_user_corpus(labels));
  TrainConfig cfg;
  cfg.b_max = 4;
  cfg.epochs = 3;
  const auto result = train_saros_b(split, init_params(1, 30, 4, 5), {0.0}, cfg);
  CHECK(result.trace.n_updates == 12);  // 4 per epoch
  for (const auto& rec : result.trace.records) CHECK(rec.block < 4);
}

TEST_CASE("saros_b: averaged params are the mean of per-visit starting checkpoints") {
  // two users, one epoch; omega_1^0 = init, omega_2^0 = params after user 1
  const auto corpus = testutil::make_corpus(2, 4,
                                            {{0, 0, 0, -1},
                                             {0, 1, 1, 1},
                                             {1, 2, 2, -1},
                                             {1, 3, 3, 1}});
  auto split = testutil::all_train_split(corpus);
  const auto start = init_params(2, 4, 3, 40);
  TrainConfig cfg;
  cfg.b_min = 0;
  cfg.b_max = 9;

  // Reference: snapshot starting weights around each single-user visit.
  std::vector<std::uint8_t> only_user0{1, 0}, only_user1{0, 1};
  const auto after_u0 = train_saros_b(split, start, {0.0}, cfg, nullptr, &only_user0);
  const auto full = train_saros_b(split, start, {0.0}, cfg);

  ModelParams want(2, 4, 3);
  for (std::size_t n = 0; n < want.user_matrix().size(); ++n) {
    want.user_matrix()[n] =
        0.5 * (start.user_matrix()[n] + after_u0.params.user_matrix()[n]);
  }
  for (std::size_t n = 0; n < want.item_matrix().size(); ++n) {
    want.item_matrix()[n] =
        0.5 * (start.item_matrix()[n] + after_u0.params.item_matrix()[n]);
  }
  CHECK(max_abs_diff(full.averaged, want) < 1e-15);
}

TEST_CASE("saros_b: rolled-back visits still count toward the average") {
  // single user below b_min: averaged must equal the unchanged start params
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1}));
  const auto start = init_params(1, 2, 4, 77);
  TrainConfig cfg;
  cfg.b_min = 5;
  cfg.b_max = 6;
  const auto result = train_saros_b(split, start, {0.0}, cfg);
  CHECK(params_equal(result.params, start));
  CHECK(params_equal(result.averaged, start));
}

TEST_CASE("saros_b: fixed seed reproduces params and trace bitwise") {
  const auto synth = generate({.n_users = 12,
                               .n_items = 20,
                               .k_true = 4,
                               .interactions_per_user = 30,
                               .positive_rate = 0.4,
                               .seed = 5});
  const auto split = chronological_split(synth.corpus, {0.7});
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto a = train_saros_b(split, init_params(12, 20, 8, 1), {0.01}, cfg);
  const auto b = train_saros_b(split, init_params(12, 20, 8, 1), {0.01}, cfg);
  CHECK(params_equal(a.params, b.params));
  CHECK(params_equal(a.averaged, b.averaged));
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t n = 0; n < a.trace.records.size(); ++n) {
    CHECK(a.trace.records[n].loss == b.trace.records[n].loss);
    CHECK(a.trace.records[n].user == b.trace.records[n].user);
  }
}

TEST_CASE("saros_b: b_min above b_max is rejected") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1}));
  TrainConfig cfg;
  cfg.b_min = 5;
  cfg.b_max = 2;
  CHECK_THROWS_AS(train_saros_b(split, init_params(1, 2, 2, 0), {0.0}, cfg), ConfigError);
}

TEST_CASE("saros_b: dimension mismatch is rejected") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1}));
  CHECK_THROWS_AS(train_saros_b(split, init_params(2, 2, 2, 0), {0.0}, {}), ConfigError);
}

TEST_CASE("resolve_b_max: averages uncapped block counts over trainable users") {
  // user 0 forms 3 blocks, user 1 forms 1: mean 2
  const auto corpus = testutil::make_corpus(2, 8,
                                            {{0, 0, 0, -1},
                                             {0, 1, 1, 1},
                                             {0, 2, 2, -1},
                                             {0, 3, 3, 1},
                                             {0, 4, 4, -1},
                                             {0, 5, 5, 1},
                                             {1, 6, 0, -1},
                                             {1, 7, 1, 1}});
  const auto split = testutil::all_train_split(corpus);
  CHECK(resolve_b_max(split, {}) == 2);
  TrainConfig explicit_cfg;
  explicit_cfg.b_max = 9;
  CHECK(resolve_b_max(split, explicit_cfg) == 9);
}

TEST_CASE("trace wall clocks are strictly increasing") {
  std::vector<int> labels;
  for (int j = 0; j < 40; ++j) labels.push_back(j % 2 ? 1 : -1);
  auto split = testutil::all_train_split(testutil::single_user_corpus(labels));
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto result = train_saros_b(split, init_params(1, 40, 4, 2), {0.0}, cfg);
  REQUIRE(result.trace.records.size() > 10);
  for (std::size_t n = 1; n < result.trace.records.size(); ++n) {
    CHECK(result.trace.records[n].wall_ns > result.trace.records[n - 1].wall_ns);
  }
}

TEST_CASE("saros_m: mu = 0 degenerates to plain gradient steps with rate alpha") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1, -1, 1}));
  const auto start = init_params(1, 4, 4, 8);
  TrainConfig cfg;
  cfg.momentum_mu = 0.0;
  cfg.momentum_alpha = 0.07;
  const auto momentum = train_saros_m(split, start, {0.0}, cfg);

  TrainConfig sgd_cfg;
  sgd_cfg.eta = 0.07;
  sgd_cfg.b_min = 0;
  sgd_cfg.b_max = kUnlimitedBlocks;
  const auto sgd = train_saros_b(split, start, {0.0}, sgd_cfg);
  CHECK(max_abs_diff(momentum.params, sgd.params) < 1e-15);
}

TEST_CASE("saros_m: two-step hand trace accumulates velocity") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1, -1, 1}));
  const auto start = init_params(1, 4, 3, 19);
  TrainConfig cfg;
  cfg.momentum_mu = 0.5;
  cfg.momentum_alpha = 0.1;
  const auto result = train_saros_m(split, start, {0.0}, cfg);

  // Reference: dense momentum on the two blocks ({0},{1}) then ({2},{3}).
  ModelParams w = start;
  std::vector<double> vu(3, 0.0);
  std::vector<std::vector<double>> vv(4, std::vector<double>(3, 0.0));
  const double mu = 0.5, alpha = 0.1;
  for (int step = 0; step < 2; ++step) {
    Block b;
    b.user = 0;
    b.negatives = {std::uint32_t(2 * step)};
    b.positives = {std::uint32_t(2 * step + 1)};
    const auto g = block_gradient(w, {0.0}, b);
    for (std::size_t d = 0; d < 3; ++d) {
      vu[d] = mu * vu[d] + (1.0 - mu) * g.user_grad[d];
      w.user(0)[d] -= alpha * vu[d];
    }
    for (const auto& [item, grad] : g.item_grads) {
      for (std::size_t d = 0; d < 3; ++d) {
        vv[item][d] = mu * vv[item][d] + (1.0 - mu) * grad[d];
        w.item(item)[d] -= alpha * vv[item][d];
      }
    }
    // rows untouched by this block still roll: w -= alpha * (mu * v)
    for (std::uint32_t i = 0; i < 4; ++i) {
      if (i == b.negatives[0] || i == b.positives[0]) continue;
      for (std::size_t d = 0; d < 3; ++d) {
        vv[i][d] *= mu;
        w.item(i)[d] -= alpha * vv[i][d];
      }
    }
  }
  CHECK(max_abs_diff(result.params, w) < 1e-12);
}

TEST_CASE("saros_m: zero gradients hold params fixed") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1, -1, 1}));
  const auto start = init_params(1, 4, 4, 0, 0.0);  // all zero, lambda 0
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto result = train_saros_m(split, start, {0.0}, cfg);
  CHECK(params_equal(result.params, start));
}

TEST_CASE("saros_m: lazy sparse updates match a dense reference on random corpora") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto synth = generate({.n_users = 6,
                                 .n_items = 10,
                                 .k_true = 3,
                                 .interactions_per_user = 16,
                                 .positive_rate = 0.4,
                                 .seed = seed});
    const auto split = chronological_split(synth.corpus, {0.8});
    const auto start = init_params(6, 10, 5, seed);
    TrainConfig cfg;
    cfg.momentum_mu = 0.8;
    cfg.momentum_alpha = 0.05;
    cfg.epochs = 2;
    const auto got = train_saros_m(split, start, {0.01}, cfg);

    // Dense reference: every row's velocity decays and moves w every step.
    ModelParams w = start;
    const std::size_t k = 5;
    std::vector<double> vel((6 + 10) * k, 0.0);
    const auto order = user_visit_order(split.train);
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (const auto u : order) {
        if (!split.trainable[u]) continue;
        for_each_block(split.train.user_rows(u), kUnlimitedBlocks, [&](const Block& blk) {
          const auto g = block_gradient(w, {0.01}, blk);
          std::vector<double> dense_g((6 + 10) * k, 0.0);
          for (std::size_t d = 0; d < k; ++d) dense_g[u * k + d] = g.user_grad[d];
          for (const auto& [item, grad] : g.item_grads) {
            for (std::size_t d = 0; d < k; ++d) dense_g[(6 + item) * k + d] = grad[d];
          }
          for (std::size_t row = 0; row < 16; ++row) {
            double* wp = row < 6 ? w.user(row).data() : w.item(row - 6).data();
            for (std::size_t d = 0; d < k; ++d) {
              vel[row * k + d] =
                  cfg.momentum_mu * vel[row * k + d] +
                  (1.0 - cfg.momentum_mu) * dense_g[row * k + d];
              wp[d] -= cfg.momentum_alpha * vel[row * k + d];
            }
          }
        });
      }
    }
    CHECK(max_abs_diff(got.params, w) < 1e-12);
  }
}

TEST_CASE("bpr: a user with only positives rejects every draw") {
  auto corpus = testutil::single_user_corpus({1, 1, 1, 1});
  auto split = testutil::all_train_split(std::move(corpus));
  const auto start = init_params(1, 4, 4, 6);
  TrainConfig cfg;
  cfg.bpr_samples = 200;
  const auto result = train_bpr(split, start, {0.0}, cfg);
  CHECK(result.trace.n_rejected == 200);
  CHECK(result.trace.n_updates == 0);
  CHECK(params_equal(result.params, start));
}

TEST_CASE("bpr: seeded runs are bit-identical") {
  const auto synth = generate({.n_users = 8,
                               .n_items = 12,
                               .k_true = 3,
                               .interactions_per_user = 20,
                               .positive_rate = 0.3,
                               .seed = 2});
  const auto split = chronological_split(synth.corpus, {0.7});
  TrainConfig cfg;
  cfg.bpr_samples = 3000;
  cfg.seed = 99;
  const auto a = train_bpr(split, init_params(8, 12, 6, 4), {0.005}, cfg);
  const auto b = train_bpr(split, init_params(8, 12, 6, 4), {0.005}, cfg);
  CHECK(params_equal(a.params, b.params));
  CHECK(a.trace.n_rejected == b.trace.n_rejected);
}

TEST_CASE("bpr: rejection rate matches the closed form within 3 sigma") {
  // one user, p positives of n items: P(reject) = 1 - 2 p (n-p) / n^2
  const int n = 10, p = 3;
  std::vector<int> labels(n, -1);
  for (int j = 0; j < p; ++j) labels[j] = 1;
  auto split = testutil::all_train_split(testutil::single_user_corpus(labels));
  TrainConfig cfg;
  cfg.bpr_samples = 40000;
  cfg.eta = 0.0;  // null steps: only the sampling path matters here
  cfg.seed = 31;
  const auto result = train_bpr(split, init_params(1, 10, 4, 1), {0.0}, cfg);
  const double reject_prob = 1.0 - 2.0 * p * (n - p) / double(n * n);
  const double sigma =
      std::sqrt(reject_prob * (1.0 - reject_prob) * double(cfg.bpr_samples));
  CHECK(std::abs(double(result.trace.n_rejected) - reject_prob * double(cfg.bpr_samples)) <=
        3.0 * sigma);
}

TEST_CASE("bpr_batch: single user with a single pair follows saros_b exactly") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1}));
  const auto start = init_params(1, 2, 4, 12);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.eta = 0.05;
  cfg.b_min = 0;
  cfg.b_max = 1;
  const auto batch = train_bpr_batch(split, start, {0.01}, cfg);
  const auto saros = train_saros_b(split, start, {0.01}, cfg);
  CHECK(max_abs_diff(batch.params, saros.params) < 1e-12);
}

TEST_CASE("bpr_batch: gradient at uniform scores pulls toward mean positive minus mean negative") {
  // zero user embedding makes every margin zero
  ModelParams p(1, 5, 3);
  Rng rng(14);
  for (double& x : p.item_matrix()) x = rng.uniform(-1.0, 1.0);
  auto split = testutil::all_train_split(testutil::single_user_corpus({1, 1, -1, -1, -1}, 5));
  TrainConfig cfg;
  cfg.eta = 1.0;
  cfg.epochs = 1;
  const auto result = train_bpr_batch(split, p, {0.0}, cfg);
  // expected user update: -eta * grad = eta/2 (mean V+ - mean V-)
  for (std::size_t d = 0; d < 3; ++d) {
    const double mean_pos = 0.5 * (p.item(0)[d] + p.item(1)[d]);
    const double mean_neg = (p.item(2)[d] + p.item(3)[d] + p.item(4)[d]) / 3.0;
    CHECK(result.params.user(0)[d] ==
          doctest::Approx(0.5 * (mean_pos - mean_neg)).epsilon(1e-12));
  }
}

TEST_CASE("bpr_batch: eta 0 leaves params unchanged over epochs") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1, -1, 1}));
  const auto start = init_params(1, 4, 4, 3);
  TrainConfig cfg;
  cfg.eta = 0.0;
  cfg.epochs = 2;
  const auto result = train_bpr_batch(split, start, {0.05}, cfg);
  CHECK(params_equal(result.params, start));
  CHECK(result.trace.records.size() == 2);
}

TEST_CASE("test_pair_loss: all-zero params score log 2 exactly") {
  const auto corpus = testutil::make_corpus(2, 4,
                                            {{0, 0, 0, 1},
                                             {0, 1, 1, -1},
                                             {1, 2, 0, -1},
                                             {1, 3, 1, 1}});
  const ModelParams zeros(2, 4, 6);
  CHECK(test_pair_loss(zeros, corpus) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("test_pair_loss: saturated separation vanishes") {
  ModelParams p(1, 2, 1);
  p.user(0)[0] = 1.0;
  p.item(0)[0] = 50.0;
  p.item(1)[0] = 0.0;
  const auto corpus = testutil::make_corpus(1, 2, {{0, 0, 0, 1}, {0, 1, 1, -1}});
  CHECK(test_pair_loss(p, corpus) < 1e-20);
}

TEST_CASE("test_pair_loss: tiny fixture matches the brute-force double loop") {
  const auto p = init_params(2, 5, 3, 111);
  const auto corpus = testutil::make_corpus(2, 5,
                                            {{0, 0, 0, 1},
                                             {0, 1, 1, -1},
                                             {0, 2, 2, -1},
                                             {1, 3, 0, 1},
                                             {1, 4, 1, 1},
                                             {1, 0, 2, -1}});
  double want = 0.0;
  {
    // user 0: pos {0}, neg {1,2}; user 1: pos {3,4}, neg {0}
    double u0 = 0.0;
    for (const std::uint32_t j : {1u, 2u}) {
      double m = 0.0;
      for (std::size_t d = 0; d < 3; ++d) m += p.user(0)[d] * (p.item(0)[d] - p.item(j)[d]);
      u0 += std::log1p(std::exp(-m));
    }
    double u1 = 0.0;
    for (const std::uint32_t i : {3u, 4u}) {
      double m = 0.0;
      for (std::size_t d = 0; d < 3; ++d) m += p.user(1)[d] * (p.item(i)[d] - p.item(0)[d]);
      u1 += std::log1p(std::exp(-m));
    }
    want = 0.5 * (u0 / 2.0 + u1 / 2.0);
  }
  CHECK(test_pair_loss(p, corpus) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("test_pair_loss: undefined when every user lacks a label side") {
  const auto corpus = testutil::make_corpus(2, 2, {{0, 0, 0, 1}, {1, 1, 0, -1}});
  CHECK_THROWS_AS(test_pair_loss(init_params(2, 2, 2, 0), corpus), DataError);
}

TEST_CASE("all four trainers decrease smoothed training loss on planted data") {
  const auto synth = generate({.n_users = 100,
                               .n_items = 100,
                               .k_true = 8,
                               .interactions_per_user = 100,
                               .positive_rate = 0.3,
                               .noise_level = 0.1,
                               .seed = 6});
  const auto split = chronological_split(synth.corpus, {0.7});
  const auto start = init_params(100, 100, 16, 11);
  const LossConfig loss_cfg{0.01};

  auto median_quarter = [](const std::vector<TraceRecord>& records, bool last) {
    const std::size_t quarter = records.size() / 4;
    std::vector<double> losses;
    for (std::size_t n = last ? records.size() - quarter : 0;
         n < (last ? records.size() : quarter); ++n) {
      losses.push_back(records[n].loss);
    }
    std::sort(losses.begin(), losses.end());
    return losses[losses.size() / 2];
  };
  auto check_decrease = [&](const TrainTrace& trace, const char* name) {
    REQUIRE(trace.records.size() >= 8);
    INFO(name);
    CHECK(median_quarter(trace.records, true) < median_quarter(trace.records, false));
  };

  TrainConfig cfg;
  cfg.eta = 0.05;
  cfg.epochs = 10;
  cfg.seed = 3;
  check_decrease(train_saros_b(split, start, loss_cfg, cfg).trace, "saros-b");
  check_decrease(train_saros_m(split, start, loss_cfg, cfg).trace, "saros-m");
  check_decrease(train_bpr(split, start, loss_cfg, cfg).trace, "bpr");
  TrainConfig batch_cfg = cfg;
  batch_cfg.epochs = 40;  // one record per epoch
  check_decrease(train_bpr_batch(split, start, loss_cfg, batch_cfg).trace, "bpr-batch");
}

TEST_CASE("trace save/load round-trips records") {
  auto split = testutil::all_train_split(testutil::single_user_corpus({-1, 1, -1, 1}));
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto result = train_saros_b(split, init_params(1, 4, 4, 2), {0.0}, cfg);
  const auto dir =
      std::filesystem::temp_directory_path() / ("saros_tests_" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  const auto path = dir / "trace.tsv";
  save_trace(result.trace, path);
  const auto loaded = load_trace(path);
  REQUIRE(loaded.records.size() == result.trace.records.size());
  for (std::size_t n = 0; n < loaded.records.size(); ++n) {
    CHECK(loaded.records[n].loss == result.trace.records[n].loss);
    CHECK(loaded.records[n].epoch == result.trace.records[n].epoch);
    CHECK(loaded.records[n].user == result.trace.records[n].user);
  }
}
