#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "saros/corpus.hpp"
#include "saros/model.hpp"

namespace saros {

struct TrainConfig {
  double eta = 0.05;           // gradient step size
  std::uint32_t b_min = 1;     // minimum blocks per user (b); fewer => roll back
  std::uint32_t b_max = 0;     // maximum blocks per user (B); 0 = average block
                               // count over trainable users, computed per run
  std::uint32_t epochs = 1;
  double momentum_mu = 0.9;    // momentum decay (saros-m)
  double momentum_alpha = 0.05;  // momentum step size (saros-m)
  std::uint64_t seed = 42;     // drives BPR sampling
  std::uint64_t bpr_samples = 0;  // 0 = epochs * train interaction count
  std::chrono::milliseconds max_wall_clock{0};  // 0 = unlimited
  std::uint32_t trace_every = 1;  // record every n-th update; 0 disables tracing
};

/// One training event: the loss is evaluated before the update is applied.
/// user is -1 for full-batch updates.
struct TraceRecord {
  std::int64_t wall_ns = 0;  // since run start, strictly increasing
  std::uint32_t epoch = 0;
  std::int64_t user = -1;
  std::uint32_t block = 0;
  double loss = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  std::uint64_t n_updates = 0;
  std::uint64_t n_rejected = 0;  // BPR draws with no usable pair
  bool budget_exhausted = false;
};

/// TSV export: wall_clock_ms, epoch, user, block, loss.
void save_trace(const TrainTrace& trace, const std::filesystem::path& path);
TrainTrace load_trace(const std::filesystem::path& path);

/// Records U_u after each of that user's block updates; consumed by the
/// memory module to build per-component embedding trajectories.
class TrajectoryRecorder {
 public:
  void reset(std::size_t n_users, std::size_t k);
  void record(std::uint32_t user, std::span<const double> user_row);
  std::size_t k() const { return k_; }
  std::size_t n_users() const { return snapshots_.size(); }
  /// Number of recorded updates for a user.
  std::size_t updates(std::uint32_t user) const { return snapshots_[user].size() / k_; }
  /// Flattened snapshots, updates(user) x k.
  std::span<const double> snapshots(std::uint32_t user) const { return snapshots_[user]; }

 private:
  std::size_t k_ = 0;
  std::vector<std::vector<double>> snapshots_;
};

struct TrainResult {
  ModelParams params;
  TrainTrace trace;
};

struct SarosResult {
  ModelParams params;    // final weights
  ModelParams averaged;  // running average of per-user starting checkpoints
  TrainTrace trace;
};

/// Resolves b_max: when cfg.b_max is 0, returns the average (ceil) block
/// count over trainable users of the train split, at least 1.
std::uint32_t resolve_b_max(const CorpusSplit& split, const TrainConfig& cfg);

/// Sequential block trainer with [b_min, b_max] gating. Processes users in
/// first-interaction order; each block applies one gradient step; users with
/// fewer than b_min blocks have all their updates rolled back. The optional
/// recorder captures U_u after each block update. The optional include mask
/// restricts training to flagged users.
SarosResult train_saros_b(const CorpusSplit& split, ModelParams params, const LossConfig& loss_cfg,
                          const TrainConfig& cfg, TrajectoryRecorder* recorder = nullptr,
                          const std::vector<std::uint8_t>* include = nullptr);

/// Momentum block trainer: v <- mu v + (1-mu) grad, w <- w - alpha v, applied
/// sparsely with decay caught up lazily per row. No b_min/b_max gating;
/// momentum state persists across users and epochs.
TrainResult train_saros_m(const CorpusSplit& split, ModelParams params, const LossConfig& loss_cfg,
                          const TrainConfig& cfg);

/// Stochastic triplet baseline: repeatedly draws a user and two of their
/// train interactions; updates on the pair when exactly one is positive.
TrainResult train_bpr(const CorpusSplit& split, ModelParams params, const LossConfig& loss_cfg,
                      const TrainConfig& cfg);

/// Full-batch baseline: one step per epoch on the gradient of the global
/// ranking loss (users averaged 1/N, pairs averaged per user).
TrainResult train_bpr_batch(const CorpusSplit& split, ModelParams params,
                            const LossConfig& loss_cfg, const TrainConfig& cfg);

/// Unregularized global pairwise loss over each test user's positives x
/// negatives (distinct items), averaged over users with both sides present.
/// The optional include mask restricts the average to flagged users.
double test_pair_loss(const ModelParams& params, const Corpus& test,
                      const std::vector<std::uint8_t>* include = nullptr);

}  // namespace saros
