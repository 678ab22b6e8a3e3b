#include "saros/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace saros {

RankedList rank_items(const ModelParams& params, std::uint32_t user,
                      std::span<const std::uint32_t> candidates,
                      std::span<const std::uint32_t> relevant_sorted) {
  RankedList ranked;
  ranked.user = user;
  ranked.items.reserve(candidates.size());
  for (const std::uint32_t item : candidates) {
    const bool rel =
        std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), item);
    ranked.items.push_back({item, score(params, user, item), rel});
    ranked.n_relevant += rel;
  }
  std::sort(ranked.items.begin(), ranked.items.end(),
            [](const RankedItem& a, const RankedItem& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.item < b.item;
            });
  return ranked;
}

double average_precision_at_k(const RankedList& ranked, std::uint32_t K) {
  if (K < 1) throw ConfigError("K must be >= 1");
  const std::size_t depth = std::min<std::size_t>(K, ranked.items.size());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (!ranked.items[pos].relevant) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
  }
  return sum / static_cast<double>(K);
}

double ndcg_at_k(const RankedList& ranked, std::uint32_t K) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (ranked.n_relevant == 0) throw DataError("ndcg undefined for a user with no relevant items");
  const std::size_t depth = std::min<std::size_t>(K, ranked.items.size());
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (ranked.items[pos].relevant) dcg += 1.0 / std::log2(static_cast<double>(pos + 2));
  }
  const std::size_t ideal = std::min<std::size_t>(K, ranked.n_relevant);
  double idcg = 0.0;
  for (std::size_t pos = 0; pos < ideal; ++pos) {
    idcg += 1.0 / std::log2(static_cast<double>(pos + 2));
  }
  return dcg / idcg;
}

double reciprocal_rank_at_k(const RankedList& ranked, std::uint32_t K) {
  if (K < 1) throw ConfigError("K must be >= 1");
  const std::size_t depth = std::min<std::size_t>(K, ranked.items.size());
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (ranked.items[pos].relevant) return 1.0 / static_cast<double>(pos + 1);
  }
  return 0.0;
}

namespace {

/// Distinct test items and the relevant subset (any positive occurrence).
void test_candidates(std::span<const Interaction> rows, std::vector<std::uint32_t>& items,
                     std::vector<std::uint32_t>& relevant) {
  items.clear();
  relevant.clear();
  for (const Interaction& r : rows) items.push_back(r.item);
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  for (const Interaction& r : rows) {
    if (r.label > 0) relevant.push_back(r.item);
  }
  std::sort(relevant.begin(), relevant.end());
  relevant.erase(std::unique(relevant.begin(), relevant.end()), relevant.end());
}

}  // namespace

EvalReport evaluate(const ModelParams& params, const Corpus& test, const EvalConfig& cfg,
                    const std::vector<std::uint8_t>* include) {
  if (params.n_users() != test.n_users() || params.n_items() != test.n_items()) {
    throw DataError("checkpoint shaped " + std::to_string(params.n_users()) + "x" +
                    std::to_string(params.n_items()) + "x" + std::to_string(params.k()) +
                    " does not match corpus with " + std::to_string(test.n_users()) +
                    " users, " + std::to_string(test.n_items()) + " items");
  }
  for (const std::uint32_t K : cfg.ks) {
    if (K < 1) throw ConfigError("K must be >= 1");
  }

  std::vector<std::uint32_t> all_items;
  if (cfg.candidates == CandidatePolicy::all_items) {
    all_items.resize(test.n_items());
    for (std::uint32_t i = 0; i < all_items.size(); ++i) all_items[i] = i;
  }

  std::vector<UserEval> slots(test.n_users());
  std::vector<std::uint8_t> evaluated(test.n_users(), 0);
  std::atomic<std::size_t> skipped{0};

  auto eval_user = [&](std::uint32_t u) {
    const auto rows = test.user_rows(u);
    if (rows.empty() || (include && !(*include)[u])) {
      ++skipped;
      return;
    }
    std::vector<std::uint32_t> items, relevant;
    test_candidates(rows, items, relevant);
    if (relevant.empty()) {
      ++skipped;
      return;
    }
    const auto& candidates =
        cfg.candidates == CandidatePolicy::all_items ? all_items : items;
    const RankedList ranked = rank_items(params, u, candidates, relevant);
    UserEval& out = slots[u];
    out.user = u;
    out.ap.reserve(cfg.ks.size());
    for (const std::uint32_t K : cfg.ks) {
      out.ap.push_back(average_precision_at_k(ranked, K));
      out.ndcg.push_back(ndcg_at_k(ranked, K));
      out.rr.push_back(reciprocal_rank_at_k(ranked, K));
    }
    evaluated[u] = 1;
  };

  if (cfg.threads <= 1) {
    for (std::uint32_t u = 0; u < test.n_users(); ++u) eval_user(u);
  } else {
    std::atomic<std::uint32_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min<std::size_t>(cfg.threads, test.n_users());
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::uint32_t u = next.fetch_add(1); u < test.n_users(); u = next.fetch_add(1)) {
          eval_user(u);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  report.ks = cfg.ks;
  report.map_at.assign(cfg.ks.size(), 0.0);
  report.mean_ndcg_at.assign(cfg.ks.size(), 0.0);
  report.mrr_at.assign(cfg.ks.size(), 0.0);
  for (std::uint32_t u = 0; u < test.n_users(); ++u) {
    if (!evaluated[u]) continue;
    for (std::size_t j = 0; j < cfg.ks.size(); ++j) {
      report.map_at[j] += slots[u].ap[j];
      report.mean_ndcg_at[j] += slots[u].ndcg[j];
      report.mrr_at[j] += slots[u].rr[j];
    }
    report.users.push_back(std::move(slots[u]));
  }
  report.n_users_evaluated = report.users.size();
  report.n_users_skipped = skipped.load();
  if (report.n_users_evaluated > 0) {
    const double inv = 1.0 / static_cast<double>(report.n_users_evaluated);
    for (std::size_t j = 0; j < cfg.ks.size(); ++j) {
      report.map_at[j] *= inv;
      report.mean_ndcg_at[j] *= inv;
      report.mrr_at[j] *= inv;
    }
  }
  return report;
}

void save_eval_aggregates(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open eval report for writing: " + path.string());
  out << "K\tmetric\tvalue\tn_users\n";
  char buf[96];
  for (std::size_t j = 0; j < report.ks.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%u\tmap\t%.17g\t%zu\n", report.ks[j], report.map_at[j],
                  report.n_users_evaluated);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%u\tndcg\t%.17g\t%zu\n", report.ks[j],
                  report.mean_ndcg_at[j], report.n_users_evaluated);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%u\tmrr\t%.17g\t%zu\n", report.ks[j], report.mrr_at[j],
                  report.n_users_evaluated);
    out << buf;
  }
  if (!out) throw DataError("failed writing eval report: " + path.string());
}

void save_eval_users(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open per-user eval for writing: " + path.string());
  out << "user\tK\tap\tndcg\trr\n";
  char buf[128];
  for (const UserEval& u : report.users) {
    for (std::size_t j = 0; j < report.ks.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%u\t%u\t%.17g\t%.17g\t%.17g\n", u.user, report.ks[j],
                    u.ap[j], u.ndcg[j], u.rr[j]);
      out << buf;
    }
  }
  if (!out) throw DataError("failed writing per-user eval: " + path.string());
}

std::string format_eval_table(const EvalReport& report) {
  std::ostringstream os;
  os << "K       MAP@K     NDCG@K    MRR@K     (users=" << report.n_users_evaluated
     << ", skipped=" << report.n_users_skipped << ")\n";
  char buf[96];
  for (std::size_t j = 0; j < report.ks.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%-7u %-9.4f %-9.4f %-9.4f\n", report.ks[j],
                  report.map_at[j], report.mean_ndcg_at[j], report.mrr_at[j]);
    os << buf;
  }
  return os.str();
}

}  // namespace saros
