#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "saros/corpus.hpp"
#include "saros/model.hpp"

namespace saros {

struct RankedItem {
  std::uint32_t item = 0;
  double score = 0.0;
  bool relevant = false;
};

/// Items sorted by descending score, ties broken by ascending item index.
struct RankedList {
  std::uint32_t user = 0;
  std::vector<RankedItem> items;
  std::size_t n_relevant = 0;
};

RankedList rank_items(const ModelParams& params, std::uint32_t user,
                      std::span<const std::uint32_t> candidates,
                      std::span<const std::uint32_t> relevant_sorted);

/// AP@K = (1/K) sum_{k<=K} r_k Pr(k) with Pr(k) the precision among the top
/// k. Note the division by K rather than by the number of relevant items.
double average_precision_at_k(const RankedList& ranked, std::uint32_t K);

/// Binary-relevance NDCG@K with IDCG = sum_{i<=min(K, n_rel)} 1/log2(1+i).
/// Requires n_relevant >= 1.
double ndcg_at_k(const RankedList& ranked, std::uint32_t K);

/// 1 / rank of the first relevant item within the top K, 0 when none.
double reciprocal_rank_at_k(const RankedList& ranked, std::uint32_t K);

enum class CandidatePolicy { test_items, all_items };

struct EvalConfig {
  std::vector<std::uint32_t> ks = {5, 10};
  CandidatePolicy candidates = CandidatePolicy::test_items;
  std::uint32_t threads = 1;
};

struct UserEval {
  std::uint32_t user = 0;
  std::vector<double> ap;    // aligned with EvalReport::ks
  std::vector<double> ndcg;
  std::vector<double> rr;
};

struct EvalReport {
  std::vector<std::uint32_t> ks;
  std::vector<UserEval> users;       // users entering the aggregates
  std::vector<double> map_at;        // per K
  std::vector<double> mean_ndcg_at;  // per K
  std::vector<double> mrr_at;        // per K
  std::size_t n_users_evaluated = 0;
  std::size_t n_users_skipped = 0;  // no test rows, no positives, or masked out
};

/// Ranks each test user's candidates and aggregates MAP/NDCG/MRR. Users
/// without a positive test item are skipped; the optional include mask
/// restricts evaluation to flagged users.
EvalReport evaluate(const ModelParams& params, const Corpus& test, const EvalConfig& cfg,
                    const std::vector<std::uint8_t>* include = nullptr);

/// TSV exports; the aggregate file has one row per (K, metric).
void save_eval_aggregates(const EvalReport& report, const std::filesystem::path& path);
void save_eval_users(const EvalReport& report, const std::filesystem::path& path);

/// Human-readable aggregate table.
std::string format_eval_table(const EvalReport& report);

}  // namespace saros
