#include "saros/memory.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace saros {

namespace {

// FFTW plan creation is not thread-safe; execution of independent plans is.
std::mutex fftw_mutex;

/// |DFT|^2 / N over bins 0..N/2 via the real-to-complex transform.
std::vector<double> half_spectrum(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) throw DataError("periodogram needs at least 2 samples");
  for (const double x : series) {
    if (!std::isfinite(x)) throw DataError("periodogram input contains a non-finite value");
  }
  std::vector<double> in(series.begin(), series.end());
  std::vector<fftw_complex> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_destroy_plan(plan);
  }
  std::vector<double> power(n / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    power[k] = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / static_cast<double>(n);
  }
  return power;
}

}  // namespace

std::vector<double> periodogram(std::span<const double> series) {
  auto power = half_spectrum(series);
  // Drop k = 0; keep k = 1..floor(N/2).
  return {power.begin() + 1, power.begin() + 1 + series.size() / 2};
}

std::vector<double> periodogram_full(std::span<const double> series) {
  const auto power = half_spectrum(series);
  const std::size_t n = series.size();
  std::vector<double> full(n);
  for (std::size_t k = 0; k < power.size(); ++k) full[k] = power[k];
  for (std::size_t k = power.size(); k < n; ++k) full[k] = power[n - k];
  return full;
}

std::optional<GphEstimate> gph_from_periodogram(std::span<const double> ordinates,
                                                std::size_t series_length, std::uint32_t m) {
  if (m < 2 || m > ordinates.size()) return std::nullopt;
  const double n = static_cast<double>(series_length);
  // Zero ordinates are dropped. With a floating-point DFT an exact zero
  // shows up as rounding noise, so anything 13 orders below the largest
  // used ordinate counts as zero.
  double top = 0.0;
  for (std::uint32_t k = 1; k <= m; ++k) top = std::max(top, ordinates[k - 1]);
  const double floor = top * 1e-13;
  // Y_k = -2 log|1 - e^{i lambda}| = -log(2 - 2 cos lambda)
  std::vector<double> ys, logs;
  ys.reserve(m);
  logs.reserve(m);
  for (std::uint32_t k = 1; k <= m; ++k) {
    const double ordinate = ordinates[k - 1];
    if (!(ordinate > floor) || !(ordinate > 0.0)) continue;
    const double lambda = 2.0 * M_PI * static_cast<double>(k) / n;
    ys.push_back(-std::log(2.0 - 2.0 * std::cos(lambda)));
    logs.push_back(std::log(ordinate));
  }
  if (ys.size() < 2) return std::nullopt;
  double y_mean = 0.0;
  for (const double y : ys) y_mean += y;
  y_mean /= static_cast<double>(ys.size());
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const double centered = ys[j] - y_mean;
    num += centered * logs[j];
    den += centered * centered;
  }
  if (!(den > 0.0)) return std::nullopt;
  return GphEstimate{num / den, static_cast<std::uint32_t>(ys.size())};
}

std::optional<GphEstimate> gph_estimate(std::span<const double> series, std::uint32_t m) {
  if (series.size() < 2 || m > series.size() / 2) return std::nullopt;
  return gph_from_periodogram(periodogram(series), series.size(), m);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::stationary: return "stationary";
    case Verdict::non_stationary: return "non_stationary";
    case Verdict::too_short: return "too_short";
  }
  return "?";
}

std::uint32_t resolve_m(std::size_t series_length, const MemoryConfig& cfg) {
  const auto half = static_cast<std::uint32_t>(series_length / 2);
  if (cfg.m_fixed != 0) return std::min(cfg.m_fixed, half);
  const auto m = static_cast<std::uint32_t>(
      std::floor(std::pow(static_cast<double>(series_length), cfg.m_exponent)));
  return std::min(m, half);
}

Verdict classify(std::span<const double> series, const MemoryConfig& cfg,
                 GphEstimate* estimate) {
  if (series.size() < cfg.min_series_len) return Verdict::too_short;
  const auto est = gph_estimate(series, resolve_m(series.size(), cfg));
  if (!est) return Verdict::too_short;
  if (estimate) *estimate = *est;
  return est->d_hat >= cfg.d_threshold ? Verdict::non_stationary : Verdict::stationary;
}

std::vector<SeriesSample> build_user_series(const TrajectoryRecorder& recorder,
                                            std::uint32_t user) {
  if (recorder.k() == 0) {
    throw DataError("trajectory recording was not enabled in the first training pass");
  }
  if (user >= recorder.n_users()) {
    throw DataError("user " + std::to_string(user) + " absent from the recorded trajectories");
  }
  const auto flat = recorder.snapshots(user);
  const std::size_t k = recorder.k();
  const std::size_t n_updates = flat.size() / k;
  std::vector<SeriesSample> series(k);
  for (std::size_t c = 0; c < k; ++c) {
    series[c].user = user;
    series[c].component = static_cast<std::int32_t>(c);
    series[c].values.resize(n_updates);
    for (std::size_t t = 0; t < n_updates; ++t) series[c].values[t] = flat[t * k + c];
  }
  return series;
}

std::vector<SeriesSample> build_user_series(const Corpus& train, std::uint32_t user) {
  if (user >= train.n_users()) {
    throw DataError("user " + std::to_string(user) + " absent from the train corpus");
  }
  SeriesSample sample;
  sample.user = user;
  sample.component = -1;
  for (const Interaction& row : train.user_rows(user)) {
    sample.values.push_back(row.label > 0 ? 1.0 : -1.0);
  }
  return {std::move(sample)};
}

std::size_t MemoryReport::n_kept() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.keep;
  return n;
}

void save_memory_report(const MemoryReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open memory report for writing: " + path.string());
  out << "user\tcomponent\tN\tm\td_hat\tverdict\tkeep\n";
  // keep flags indexed by user for the per-series rows
  std::unordered_map<std::uint32_t, bool> keep;
  for (const auto& u : report.users) keep[u.user] = u.keep;
  char buf[128];
  for (const SeriesReport& s : report.series) {
    if (s.verdict == Verdict::too_short) {
      std::snprintf(buf, sizeof(buf), "%u\t%d\t%u\t%u\tnan\t%s\t%d\n", s.user, s.component,
                    s.length, s.m_used, to_string(s.verdict).c_str(), keep[s.user] ? 1 : 0);
    } else {
      std::snprintf(buf, sizeof(buf), "%u\t%d\t%u\t%u\t%.17g\t%s\t%d\n", s.user, s.component,
                    s.length, s.m_used, s.d_hat, to_string(s.verdict).c_str(),
                    keep[s.user] ? 1 : 0);
    }
    out << buf;
  }
  if (!out) throw DataError("failed writing memory report: " + path.string());
}

MemoryReport memory_report(const CorpusSplit& split, const TrajectoryRecorder& recorder,
                           const Corpus& train, const MemoryConfig& mem_cfg,
                           SeriesSource source, std::uint32_t threads) {
  std::vector<std::uint32_t> users;
  for (std::uint32_t u = 0; u < split.train.n_users(); ++u) {
    if (split.trainable[u]) users.push_back(u);
  }
  std::vector<std::vector<SeriesReport>> per_user(users.size());
  std::vector<UserMemory> user_rows(users.size());

  auto analyze = [&](std::size_t idx) {
    const std::uint32_t u = users[idx];
    const auto series = source == SeriesSource::embedding_trajectory
                            ? build_user_series(recorder, u)
                            : build_user_series(train, u);
    UserMemory um{u, 0, false};
    for (const SeriesSample& s : series) {
      SeriesReport rep;
      rep.user = u;
      rep.component = s.component;
      rep.length = static_cast<std::uint32_t>(s.values.size());
      rep.m_used = resolve_m(s.values.size(), mem_cfg);
      GphEstimate est;
      rep.verdict = classify(s.values, mem_cfg, &est);
      if (rep.verdict != Verdict::too_short) {
        rep.d_hat = est.d_hat;
        rep.m_used = est.m_used;
      }
      um.n_stationary += rep.verdict == Verdict::stationary;
      per_user[idx].push_back(rep);
    }
    um.keep = um.n_stationary >= mem_cfg.keep_threshold;
    user_rows[idx] = um;
  };

  if (threads <= 1 || users.size() < 2) {
    for (std::size_t idx = 0; idx < users.size(); ++idx) analyze(idx);
  } else {
    const std::size_t n_workers = std::min<std::size_t>(threads, users.size());
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t idx = next.fetch_add(1); idx < users.size();
             idx = next.fetch_add(1)) {
          analyze(idx);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  MemoryReport report;
  for (auto& rows : per_user) {
    report.series.insert(report.series.end(), rows.begin(), rows.end());
  }
  report.users = std::move(user_rows);
  return report;
}

MosaicResult mosaic(const CorpusSplit& split, const LossConfig& loss_cfg,
                    const TrainConfig& train_cfg, const MemoryConfig& mem_cfg,
                    const ModelInit& init, SeriesSource source, std::uint32_t threads) {
  auto fresh = [&] {
    return init_params(split.train.n_users(), split.train.n_items(), init.k, train_cfg.seed,
                       init.scale);
  };

  // Pass 1: plain training over the full corpus with trajectory recording.
  TrajectoryRecorder recorder;
  MosaicResult result;
  (void)train_saros_b(split, fresh(), loss_cfg, train_cfg, &recorder);
  result.report = memory_report(split, recorder, split.train, mem_cfg, source, threads);

  result.keep.assign(split.train.n_users(), 0);
  for (const UserMemory& u : result.report.users) result.keep[u.user] = u.keep;
  if (result.report.n_kept() == 0) throw EmptyFilterError(result.report);

  // Pass 2: fresh seeded initialization, training restricted to kept users.
  result.pass2 = train_saros_b(split, fresh(), loss_cfg, train_cfg, nullptr, &result.keep);
  return result;
}

}  // namespace saros
