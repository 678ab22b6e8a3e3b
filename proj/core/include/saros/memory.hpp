#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saros/corpus.hpp"
#include "saros/trainers.hpp"

namespace saros {

/// Periodogram I_N(lambda_k) = (1/N) |sum_t X_t e^{i t lambda_k}|^2 at the
/// Fourier frequencies lambda_k = 2 pi k / N for k = 1..floor(N/2).
std::vector<double> periodogram(std::span<const double> series);

/// Same, over the full grid k = 0..N-1 (conjugate-symmetric for real input);
/// its sum equals sum_t X_t^2.
std::vector<double> periodogram_full(std::span<const double> series);

struct GphEstimate {
  double d_hat = 0.0;
  std::uint32_t m_used = 0;  // ordinates entering the regression
};

/// Log-periodogram regression of log I(lambda_k) on
/// Y_k = -2 log|1 - e^{i lambda_k}| over k = 1..m. Zero ordinates are dropped;
/// nullopt when fewer than two usable ordinates remain or the regressor
/// degenerates.
std::optional<GphEstimate> gph_estimate(std::span<const double> series, std::uint32_t m);

/// Regression core on precomputed ordinates (ordinates[j] is I(lambda_{j+1})
/// for a length-n series).
std::optional<GphEstimate> gph_from_periodogram(std::span<const double> ordinates,
                                                std::size_t series_length, std::uint32_t m);

enum class Verdict { stationary, non_stationary, too_short };

std::string to_string(Verdict v);

struct MemoryConfig {
  double m_exponent = 0.5;         // m = floor(N^m_exponent), clamped to N/2
  std::uint32_t m_fixed = 0;       // nonzero overrides the exponent rule
  std::uint32_t min_series_len = 8;
  double d_threshold = 0.5;        // d_hat >= threshold => non-stationary
  std::uint32_t keep_threshold = 4;  // stationary components needed to keep a user
};

std::uint32_t resolve_m(std::size_t series_length, const MemoryConfig& cfg);

/// too_short below min_series_len or when estimation fails; otherwise
/// non_stationary iff d_hat >= d_threshold.
Verdict classify(std::span<const double> series, const MemoryConfig& cfg,
                 GphEstimate* estimate = nullptr);

enum class SeriesSource { embedding_trajectory, feedback_sequence };

struct SeriesSample {
  std::vector<double> values;
  std::uint32_t user = 0;
  std::int32_t component = -1;  // latent component, -1 for the feedback series
};

/// Per-user series for memory analysis. embedding_trajectory yields k series
/// (one per latent component) from the recorded first-pass updates;
/// feedback_sequence yields the +-1 label sequence from the train stream.
std::vector<SeriesSample> build_user_series(const TrajectoryRecorder& recorder,
                                            std::uint32_t user);
std::vector<SeriesSample> build_user_series(const Corpus& train, std::uint32_t user);

struct SeriesReport {
  std::uint32_t user = 0;
  std::int32_t component = -1;
  std::uint32_t length = 0;
  std::uint32_t m_used = 0;
  double d_hat = 0.0;  // meaningful only when verdict != too_short
  Verdict verdict = Verdict::too_short;
};

struct UserMemory {
  std::uint32_t user = 0;
  std::uint32_t n_stationary = 0;
  bool keep = false;
};

struct MemoryReport {
  std::vector<SeriesReport> series;
  std::vector<UserMemory> users;

  std::size_t n_kept() const;
};

/// TSV export: user, component, N, m, d_hat, verdict, keep.
void save_memory_report(const MemoryReport& report, const std::filesystem::path& path);

/// Thrown by mosaic when the stationarity filter removes every user.
class EmptyFilterError : public EmptyCorpusError {
 public:
  explicit EmptyFilterError(MemoryReport report)
      : EmptyCorpusError("memory filter removed every trainable user"),
        report_(std::move(report)) {}
  const MemoryReport& report() const { return report_; }

 private:
  MemoryReport report_;
};

struct MosaicResult {
  std::vector<std::uint8_t> keep;  // per user; false users are filtered out
  MemoryReport report;
  SarosResult pass2;  // retrained from fresh seeded init on the kept users
};

/// Model shape used for both training passes.
struct ModelInit {
  std::size_t k = 16;
  double scale = -1.0;  // < 0 selects the init_params default 1/sqrt(k)
};

/// Memory-aware two-pass pipeline: train on the full corpus recording
/// embedding trajectories, estimate per-user memory, drop users without
/// enough stationary components, then retrain on the filtered corpus.
MosaicResult mosaic(const CorpusSplit& split, const LossConfig& loss_cfg,
                    const TrainConfig& train_cfg, const MemoryConfig& mem_cfg,
                    const ModelInit& init = {},
                    SeriesSource source = SeriesSource::embedding_trajectory,
                    std::uint32_t threads = 1);

/// Memory report over all trainable users of a split (pass 1 of mosaic).
MemoryReport memory_report(const CorpusSplit& split, const TrajectoryRecorder& recorder,
                           const Corpus& train, const MemoryConfig& mem_cfg,
                           SeriesSource source, std::uint32_t threads = 1);

}  // namespace saros
