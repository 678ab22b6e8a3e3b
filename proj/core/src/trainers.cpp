#include "saros/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace saros {

namespace {

/// Monotonic run clock; reported values are strictly increasing.
class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}

  std::int64_t now_ns() {
    auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                  std::chrono::steady_clock::now() - start_)
                  .count();
    if (ns <= last_) ns = last_ + 1;
    last_ = ns;
    return ns;
  }

  bool exhausted(std::chrono::milliseconds budget) const {
    if (budget.count() <= 0) return false;
    return std::chrono::steady_clock::now() - start_ >= budget;
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::int64_t last_ = 0;
};

void validate_common(const TrainConfig& cfg) {
  // eta 0 is allowed as an explicit null step
  if (!(cfg.eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
}

void check_dims(const ModelParams& params, const Corpus& corpus) {
  if (params.n_users() != corpus.n_users() || params.n_items() != corpus.n_items()) {
    throw ConfigError("params shaped " + std::to_string(params.n_users()) + "x" +
                      std::to_string(params.n_items()) + " but corpus has " +
                      std::to_string(corpus.n_users()) + " users, " +
                      std::to_string(corpus.n_items()) + " items");
  }
}

void apply_gradient(ModelParams& params, const BlockGradient& grad, double rate) {
  auto uu = params.user(grad.user);
  for (std::size_t d = 0; d < uu.size(); ++d) uu[d] -= rate * grad.user_grad[d];
  for (const auto& [item, g] : grad.item_grads) {
    auto vi = params.item(item);
    for (std::size_t d = 0; d < vi.size(); ++d) vi[d] -= rate * g[d];
  }
}

bool user_included(std::uint32_t u, const std::vector<std::uint8_t>& trainable,
                   const std::vector<std::uint8_t>* include) {
  if (!trainable[u]) return false;
  return !include || (*include)[u];
}

/// Distinct item sets for one user's stream. An item with any positive
/// occurrence counts as preferred. Outputs sorted for deterministic sums.
void user_item_sets(std::span<const Interaction> rows, std::vector<std::uint32_t>& pos,
                    std::vector<std::uint32_t>& neg) {
  pos.clear();
  neg.clear();
  std::unordered_map<std::uint32_t, bool> seen;
  seen.reserve(rows.size());
  for (const Interaction& r : rows) seen[r.item] = seen[r.item] || r.label > 0;
  for (const auto& [item, is_pos] : seen) (is_pos ? pos : neg).push_back(item);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
}

}  // namespace

std::uint32_t resolve_b_max(const CorpusSplit& split, const TrainConfig& cfg) {
  if (cfg.b_max != 0) return cfg.b_max;
  std::uint64_t total = 0;
  std::size_t n = 0;
  for (std::uint32_t u = 0; u < split.train.n_users(); ++u) {
    if (!split.trainable[u]) continue;
    total += for_each_block(split.train.user_rows(u), kUnlimitedBlocks, [](const Block&) {});
    ++n;
  }
  if (n == 0) return 1;
  const double mean = static_cast<double>(total) / static_cast<double>(n);
  return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::ceil(mean)));
}

SarosResult train_saros_b(const CorpusSplit& split, ModelParams params, const LossConfig& loss_cfg,
                          const TrainConfig& cfg, TrajectoryRecorder* recorder,
                          const std::vector<std::uint8_t>* include) {
  validate_common(cfg);
  check_dims(params, split.train);
  const std::uint32_t b_max = resolve_b_max(split, cfg);
  if (cfg.b_min > b_max) {
    throw ConfigError("b_min (" + std::to_string(cfg.b_min) + ") exceeds b_max (" +
                      std::to_string(b_max) + ")");
  }
  if (recorder) recorder->reset(params.n_users(), params.k());

  const std::size_t k = params.k();
  const std::size_t n_rows = params.n_users() + params.n_items();
  const auto order = user_visit_order(split.train);

  // Running average of per-user starting checkpoints, accumulated lazily:
  // a row's value is flushed into sums only when it is about to change.
  std::vector<double> sums(n_rows * k, 0.0);
  std::vector<std::uint32_t> last_flush(n_rows, 0);
  std::uint32_t visit = 0;

  // Per-visit first-touch snapshots back the b_min rollback.
  std::vector<std::uint32_t> stamps(n_rows, 0);
  std::vector<std::uint32_t> snap_rows;
  std::vector<double> snap_values;

  auto row_data = [&](std::uint32_t row) {
    return row < params.n_users() ? params.user(row).data()
                                  : params.item(row - params.n_users()).data();
  };
  auto touch = [&](std::uint32_t row) {
    if (stamps[row] == visit) return;
    stamps[row] = visit;
    snap_rows.push_back(row);
    const double* src = row_data(row);
    snap_values.insert(snap_values.end(), src, src + k);
  };

  WallClock clock;
  TrainTrace trace;
  BlockGradient grad;
  bool stop = false;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    for (const std::uint32_t u : order) {
      if (!user_included(u, split.trainable, include)) continue;
      if (clock.exhausted(cfg.max_wall_clock)) {
        trace.budget_exhausted = true;
        stop = true;
        break;
      }
      ++visit;
      snap_rows.clear();
      snap_values.clear();
      const std::uint32_t t =
          for_each_block(split.train.user_rows(u), b_max, [&](const Block& block) {
            block_gradient(params, loss_cfg, block, grad);
            touch(u);
            for (const auto& [item, g] : grad.item_grads) touch(params.n_users() + item);
            if (cfg.trace_every && trace.n_updates % cfg.trace_every == 0) {
              trace.records.push_back({clock.now_ns(), epoch, u, block.index, grad.loss});
            }
            apply_gradient(params, grad, cfg.eta);
            ++trace.n_updates;
            if (recorder) recorder->record(u, params.user(u));
          });
      if (t >= cfg.b_min) {
        // Keep: the snapshot value held from visit start last_flush+1 .. visit.
        for (std::size_t s = 0; s < snap_rows.size(); ++s) {
          const std::uint32_t row = snap_rows[s];
          const double weight = visit - last_flush[row];
          const double* old = snap_values.data() + s * k;
          double* acc = sums.data() + std::size_t(row) * k;
          for (std::size_t d = 0; d < k; ++d) acc[d] += weight * old[d];
          last_flush[row] = visit;
        }
      } else {
        for (std::size_t s = 0; s < snap_rows.size(); ++s) {
          std::memcpy(row_data(snap_rows[s]), snap_values.data() + s * k, k * sizeof(double));
        }
      }
    }
  }

  SarosResult result{std::move(params), ModelParams(), std::move(trace)};
  if (visit == 0) {
    result.averaged = result.params;
  } else {
    ModelParams avg(result.params.n_users(), result.params.n_items(), k, result.params.seed());
    for (std::uint32_t row = 0; row < n_rows; ++row) {
      const double* cur = row < avg.n_users()
                              ? result.params.user(row).data()
                              : result.params.item(row - avg.n_users()).data();
      double* acc = sums.data() + std::size_t(row) * k;
      double* out = row < avg.n_users() ? avg.user(row).data()
                                        : avg.item(row - avg.n_users()).data();
      const double weight = visit - last_flush[row];
      for (std::size_t d = 0; d < k; ++d) out[d] = (acc[d] + weight * cur[d]) / visit;
    }
    result.averaged = std::move(avg);
  }
  return result;
}

TrainResult train_saros_m(const CorpusSplit& split, ModelParams params, const LossConfig& loss_cfg,
                          const TrainConfig& cfg) {
  validate_common(cfg);
  check_dims(params, split.train);
  if (!(cfg.momentum_mu >= 0.0 && cfg.momentum_mu < 1.0)) {
    throw ConfigError("momentum_mu must lie in [0,1)");
  }
  if (!(cfg.momentum_alpha > 0.0)) throw ConfigError("momentum_alpha must be > 0");

  const std::size_t k = params.k();
  const std::size_t n_rows = params.n_users() + params.n_items();
  const double mu = cfg.momentum_mu;
  const double alpha = cfg.momentum_alpha;
  const auto order = user_visit_order(split.train);

  // Momentum state with lazy decay: between touches of a row its velocity
  // only decays (v <- mu v) while still moving the weights; the geometric
  // tail is applied in one catch-up step.
  std::vector<double> velocity(n_rows * k, 0.0);
  std::vector<std::uint64_t> last_step(n_rows, 0);
  std::uint64_t step = 0;

  auto row_data = [&](std::uint32_t row) {
    return row < params.n_users() ? params.user(row).data()
                                  : params.item(row - params.n_users()).data();
  };
  auto catch_up = [&](std::uint32_t row, std::uint64_t upto) {
    const std::uint64_t pending = upto - last_step[row];
    if (pending == 0) return;
    last_step[row] = upto;
    double* v = velocity.data() + std::size_t(row) * k;
    if (mu == 0.0) {
      std::fill(v, v + k, 0.0);
      return;
    }
    const double decay = std::pow(mu, static_cast<double>(pending));
    // sum_{j=1..n} mu^j = mu (1 - mu^n) / (1 - mu)
    const double drift = alpha * mu * (1.0 - decay) / (1.0 - mu);
    double* w = row_data(row);
    for (std::size_t d = 0; d < k; ++d) {
      w[d] -= drift * v[d];
      v[d] *= decay;
    }
  };

  WallClock clock;
  TrainTrace trace;
  BlockGradient grad;
  bool stop = false;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    for (const std::uint32_t u : order) {
      if (!split.trainable[u]) continue;
      if (clock.exhausted(cfg.max_wall_clock)) {
        trace.budget_exhausted = true;
        stop = true;
        break;
      }
      for_each_block(split.train.user_rows(u), kUnlimitedBlocks, [&](const Block& block) {
        catch_up(u, step);
        for (const std::uint32_t i : block.positives) catch_up(params.n_users() + i, step);
        for (const std::uint32_t i : block.negatives) catch_up(params.n_users() + i, step);
        block_gradient(params, loss_cfg, block, grad);
        if (cfg.trace_every && trace.n_updates % cfg.trace_every == 0) {
          trace.records.push_back({clock.now_ns(), epoch, u, block.index, grad.loss});
        }
        ++step;
        auto advance = [&](std::uint32_t row, const std::vector<double>& g) {
          double* v = velocity.data() + std::size_t(row) * k;
          double* w = row_data(row);
          for (std::size_t d = 0; d < k; ++d) {
            v[d] = mu * v[d] + (1.0 - mu) * g[d];
            w[d] -= alpha * v[d];
          }
          last_step[row] = step;
        };
        advance(u, grad.user_grad);
        for (const auto& [item, g] : grad.item_grads) advance(params.n_users() + item, g);
        ++trace.n_updates;
      });
    }
  }
  for (std::uint32_t row = 0; row < n_rows; ++row) catch_up(row, step);
  return {std::move(params), std::move(trace)};
}

TrainResult train_bpr(const CorpusSplit& split, ModelParams params, const LossConfig& loss_cfg,
                      const TrainConfig& cfg) {
  validate_common(cfg);
  check_dims(params, split.train);

  std::vector<std::uint32_t> users;
  for (std::uint32_t u = 0; u < split.train.n_users(); ++u) {
    if (!split.train.user_rows(u).empty()) users.push_back(u);
  }
  TrainTrace trace;
  const std::uint64_t n_samples =
      cfg.bpr_samples ? cfg.bpr_samples
                      : std::uint64_t(cfg.epochs) * split.train.rows().size();
  if (users.empty() || n_samples == 0) return {std::move(params), std::move(trace)};

  Rng rng(cfg.seed);
  WallClock clock;
  BlockGradient grad;
  Block pair;
  pair.positives.resize(1);
  pair.negatives.resize(1);
  const std::uint64_t samples_per_epoch = std::max<std::uint64_t>(1, n_samples / cfg.epochs);
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    if ((s & 1023u) == 0 && clock.exhausted(cfg.max_wall_clock)) {
      trace.budget_exhausted = true;
      break;
    }
    const std::uint32_t u = users[rng.index(users.size())];
    const auto rows = split.train.user_rows(u);
    const Interaction& a = rows[rng.index(rows.size())];
    const Interaction& b = rows[rng.index(rows.size())];
    if (a.label == b.label) {
      ++trace.n_rejected;
      continue;
    }
    pair.user = u;
    pair.positives[0] = a.label > 0 ? a.item : b.item;
    pair.negatives[0] = a.label > 0 ? b.item : a.item;
    block_gradient(params, loss_cfg, pair, grad);
    if (cfg.trace_every && trace.n_updates % cfg.trace_every == 0) {
      const auto epoch = static_cast<std::uint32_t>(
          std::min<std::uint64_t>(cfg.epochs - 1, s / samples_per_epoch));
      trace.records.push_back({clock.now_ns(), epoch, u,
                               static_cast<std::uint32_t>(trace.n_updates), grad.loss});
    }
    apply_gradient(params, grad, cfg.eta);
    ++trace.n_updates;
  }
  return {std::move(params), std::move(trace)};
}

TrainResult train_bpr_batch(const CorpusSplit& split, ModelParams params,
                            const LossConfig& loss_cfg, const TrainConfig& cfg) {
  validate_common(cfg);
  check_dims(params, split.train);

  const std::size_t k = params.k();
  std::vector<std::uint32_t> active;
  for (std::uint32_t u = 0; u < split.train.n_users(); ++u) {
    if (split.trainable[u]) active.push_back(u);
  }
  TrainTrace trace;
  if (active.empty()) return {std::move(params), std::move(trace)};

  // Cache per-user distinct item sets; they do not change between epochs.
  std::vector<std::vector<std::uint32_t>> pos_sets(active.size()), neg_sets(active.size());
  for (std::size_t idx = 0; idx < active.size(); ++idx) {
    user_item_sets(split.train.user_rows(active[idx]), pos_sets[idx], neg_sets[idx]);
  }

  std::vector<double> grad_u(params.n_users() * k);
  std::vector<double> grad_v(params.n_items() * k);
  const double inv_users = 1.0 / static_cast<double>(active.size());

  WallClock clock;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (clock.exhausted(cfg.max_wall_clock)) {
      trace.budget_exhausted = true;
      break;
    }
    std::fill(grad_u.begin(), grad_u.end(), 0.0);
    std::fill(grad_v.begin(), grad_v.end(), 0.0);
    double loss = 0.0;
    for (std::size_t idx = 0; idx < active.size(); ++idx) {
      const std::uint32_t u = active[idx];
      const auto& pos = pos_sets[idx];
      const auto& neg = neg_sets[idx];
      const auto uu = params.user(u);
      const double pair_weight =
          inv_users / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
      double* gu = grad_u.data() + std::size_t(u) * k;
      double user_loss = 0.0;
      for (const std::uint32_t i : pos) {
        const auto vi = params.item(i);
        double* gi = grad_v.data() + std::size_t(i) * k;
        double vi_norm = 0.0;
        for (std::size_t d = 0; d < k; ++d) vi_norm += vi[d] * vi[d];
        for (const std::uint32_t j : neg) {
          const auto vj = params.item(j);
          double* gj = grad_v.data() + std::size_t(j) * k;
          double margin = 0.0, uu_norm = 0.0, vj_norm = 0.0;
          for (std::size_t d = 0; d < k; ++d) {
            margin += uu[d] * (vi[d] - vj[d]);
            uu_norm += uu[d] * uu[d];
            vj_norm += vj[d] * vj[d];
          }
          user_loss += detail::softplus(-margin) +
                       loss_cfg.lambda_reg * (uu_norm + vi_norm + vj_norm);
          const double coef = -detail::sigmoid(-margin) * pair_weight;
          const double reg = 2.0 * loss_cfg.lambda_reg * pair_weight;
          for (std::size_t d = 0; d < k; ++d) {
            gu[d] += coef * (vi[d] - vj[d]) + reg * uu[d];
            gi[d] += coef * uu[d] + reg * vi[d];
            gj[d] += -coef * uu[d] + reg * vj[d];
          }
        }
      }
      loss += user_loss /
              (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    }
    loss *= inv_users;
    if (cfg.trace_every && epoch % cfg.trace_every == 0) {
      trace.records.push_back({clock.now_ns(), epoch, -1, epoch, loss});
    }
    auto um = params.user_matrix();
    for (std::size_t n = 0; n < um.size(); ++n) um[n] -= cfg.eta * grad_u[n];
    auto vm = params.item_matrix();
    for (std::size_t n = 0; n < vm.size(); ++n) vm[n] -= cfg.eta * grad_v[n];
    ++trace.n_updates;
  }
  return {std::move(params), std::move(trace)};
}

double test_pair_loss(const ModelParams& params, const Corpus& test,
                      const std::vector<std::uint8_t>* include) {
  check_dims(params, test);
  std::vector<std::uint32_t> pos, neg;
  double total = 0.0;
  std::size_t n_users = 0;
  for (std::uint32_t u = 0; u < test.n_users(); ++u) {
    if (include && !(*include)[u]) continue;
    const auto rows = test.user_rows(u);
    if (rows.empty()) continue;
    user_item_sets(rows, pos, neg);
    if (pos.empty() || neg.empty()) continue;
    const auto uu = params.user(u);
    double user_loss = 0.0;
    for (const std::uint32_t i : pos) {
      const auto vi = params.item(i);
      for (const std::uint32_t j : neg) {
        const auto vj = params.item(j);
        double margin = 0.0;
        for (std::size_t d = 0; d < uu.size(); ++d) margin += uu[d] * (vi[d] - vj[d]);
        user_loss += detail::softplus(-margin);
      }
    }
    total += user_loss / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    ++n_users;
  }
  if (n_users == 0) {
    throw DataError("test pair loss undefined: no evaluated user has both labels in test");
  }
  return total / static_cast<double>(n_users);
}

void TrajectoryRecorder::reset(std::size_t n_users, std::size_t k) {
  k_ = k;
  snapshots_.assign(n_users, {});
}

void TrajectoryRecorder::record(std::uint32_t user, std::span<const double> user_row) {
  auto& dst = snapshots_[user];
  dst.insert(dst.end(), user_row.begin(), user_row.end());
}

void save_trace(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open trace for writing: " + path.string());
  out << "wall_clock_ms\tepoch\tuser\tblock\tloss\n";
  char buf[160];
  for (const TraceRecord& r : trace.records) {
    std::snprintf(buf, sizeof(buf), "%.6f\t%u\t%lld\t%u\t%.17g\n",
                  static_cast<double>(r.wall_ns) / 1e6, r.epoch,
                  static_cast<long long>(r.user), r.block, r.loss);
    out << buf;
  }
  if (!out) throw DataError("failed writing trace: " + path.string());
}

TrainTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace: " + path.string());
  TrainTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    TraceRecord r;
    double wall_ms = 0.0;
    long long user = 0;
    if (std::sscanf(line.c_str(), "%lf\t%u\t%lld\t%u\t%lg", &wall_ms, &r.epoch, &user,
                    &r.block, &r.loss) != 5) {
      throw ParseError(line_no, "malformed trace record in " + path.string());
    }
    r.wall_ns = static_cast<std::int64_t>(std::llround(wall_ms * 1e6));
    r.user = user;
    trace.records.push_back(r);
  }
  trace.n_updates = trace.records.size();
  return trace;
}

}  // namespace saros
