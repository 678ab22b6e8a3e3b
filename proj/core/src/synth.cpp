#include "saros/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "saros/model.hpp"

namespace saros {

SynthCorpus generate(const SynthSpec& spec) {
  if (spec.n_users == 0 || spec.n_items == 0 || spec.k_true == 0) {
    throw ConfigError("synth spec needs n_users, n_items and k_true >= 1");
  }
  if (spec.interactions_per_user < 2) {
    throw ConfigError("interactions_per_user must be >= 2 to realize both labels");
  }
  if (!(spec.positive_rate > 0.0 && spec.positive_rate < 1.0)) {
    throw ConfigError("positive_rate must lie strictly in (0,1)");
  }
  if (!(spec.drift_fraction >= 0.0 && spec.drift_fraction <= 1.0)) {
    throw ConfigError("drift_fraction must lie in [0,1]");
  }

  SynthCorpus out;
  out.k_true = spec.k_true;
  out.seed = spec.seed;
  Rng rng(spec.seed);
  out.true_user.resize(spec.n_users * spec.k_true);
  out.true_item.resize(spec.n_items * spec.k_true);
  for (double& x : out.true_user) x = rng.uniform(-1.0, 1.0);
  for (double& x : out.true_item) x = rng.uniform(-1.0, 1.0);

  // Drifting users are the first ceil(drift_fraction * n) positions of a
  // seeded permutation, so the planted flag is independent of user index.
  out.drifting.assign(spec.n_users, 0);
  {
    std::vector<std::uint32_t> perm(spec.n_users);
    for (std::uint32_t u = 0; u < spec.n_users; ++u) perm[u] = u;
    for (std::size_t i = spec.n_users; i > 1; --i) {
      std::swap(perm[i - 1], perm[rng.index(i)]);
    }
    const auto n_drift = static_cast<std::size_t>(
        std::llround(spec.drift_fraction * static_cast<double>(spec.n_users)));
    for (std::size_t i = 0; i < n_drift; ++i) out.drifting[perm[i]] = 1;
  }

  // Distinct items per user while they fit; repeated impressions beyond that.
  const std::size_t per_user = spec.interactions_per_user;
  const bool with_replacement = per_user > spec.n_items;
  std::vector<Interaction> rows;
  rows.reserve(spec.n_users * per_user);
  std::vector<std::uint32_t> item_pool(std::max(spec.n_items, per_user));
  std::vector<double> scores(per_user), sorted(per_user), walk(spec.k_true);
  for (std::uint32_t u = 0; u < spec.n_users; ++u) {
    Rng user_rng = rng.fork(u);
    if (with_replacement) {
      for (std::size_t j = 0; j < per_user; ++j) {
        item_pool[j] = static_cast<std::uint32_t>(user_rng.index(spec.n_items));
      }
    } else {
      // Partial Fisher-Yates shuffle.
      for (std::uint32_t i = 0; i < spec.n_items; ++i) item_pool[i] = i;
      for (std::size_t j = 0; j < per_user; ++j) {
        std::swap(item_pool[j], item_pool[j + user_rng.index(spec.n_items - j)]);
      }
    }
    std::copy_n(out.true_user.begin() + std::size_t(u) * spec.k_true, spec.k_true,
                walk.begin());
    // Drifting preference state walks in homogeneous coordinates: the latent
    // vector plus a bias that shifts the user's overall propensity, so their
    // feedback rate genuinely wanders over time.
    double bias_walk = 0.0;
    for (std::size_t j = 0; j < per_user; ++j) {
      const std::uint32_t item = item_pool[j];
      double s = bias_walk;
      for (std::size_t d = 0; d < spec.k_true; ++d) {
        s += walk[d] * out.true_item[std::size_t(item) * spec.k_true + d];
      }
      scores[j] = s + spec.noise_level * user_rng.normal();
      if (out.drifting[u]) {
        for (std::size_t d = 0; d < spec.k_true; ++d) {
          walk[d] += spec.drift_step * user_rng.normal();
        }
        bias_walk += spec.drift_step * user_rng.normal();
      }
    }
    // Threshold at the empirical quantile hitting the target rate; clamped so
    // every user realizes both labels.
    const auto n_pos = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(spec.positive_rate * double(per_user))), 1,
        per_user - 1);
    sorted.assign(scores.begin(), scores.end());
    std::nth_element(sorted.begin(), sorted.begin() + (n_pos - 1), sorted.end(),
                     std::greater<double>());
    const double threshold = sorted[n_pos - 1];
    for (std::size_t j = 0; j < per_user; ++j) {
      rows.push_back({u, item_pool[j], static_cast<std::int64_t>(j),
                      scores[j] >= threshold ? std::int8_t(1) : std::int8_t(-1)});
    }
  }
  out.corpus = Corpus(spec.n_users, spec.n_items, std::move(rows));
  return out;
}

void save_ground_truth(const SynthCorpus& synth, const std::filesystem::path& truth_path,
                       const std::filesystem::path& drift_path) {
  const std::size_t n_users = synth.true_user.size() / synth.k_true;
  const std::size_t n_items = synth.true_item.size() / synth.k_true;
  ModelParams truth(n_users, n_items, synth.k_true, synth.seed);
  std::copy(synth.true_user.begin(), synth.true_user.end(), truth.user_matrix().begin());
  std::copy(synth.true_item.begin(), synth.true_item.end(), truth.item_matrix().begin());
  save_checkpoint(truth, truth_path);

  std::ofstream out(drift_path);
  if (!out) throw DataError("cannot open drift file for writing: " + drift_path.string());
  out << "user\tdrifting\n";
  for (std::size_t u = 0; u < synth.drifting.size(); ++u) {
    out << u << '\t' << int(synth.drifting[u]) << '\n';
  }
  if (!out) throw DataError("failed writing drift file: " + drift_path.string());
}

void load_ground_truth(SynthCorpus& synth, const std::filesystem::path& truth_path,
                       const std::filesystem::path& drift_path) {
  const ModelParams truth = load_checkpoint(truth_path);
  synth.k_true = truth.k();
  synth.seed = truth.seed();
  synth.true_user.assign(truth.user_matrix().begin(), truth.user_matrix().end());
  synth.true_item.assign(truth.item_matrix().begin(), truth.item_matrix().end());

  std::ifstream in(drift_path);
  if (!in) throw DataError("cannot open drift file: " + drift_path.string());
  synth.drifting.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::size_t user = 0;
    int flag = 0;
    if (std::sscanf(line.c_str(), "%zu\t%d", &user, &flag) != 2) {
      throw ParseError(line_no, "malformed drift row in " + drift_path.string());
    }
    if (synth.drifting.size() <= user) synth.drifting.resize(user + 1, 0);
    synth.drifting[user] = flag != 0;
  }
}

}  // namespace saros
