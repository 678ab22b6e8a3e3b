#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "saros/corpus.hpp"

namespace saros {

/// Planted-structure corpus generator used as the desk-scale oracle.
struct SynthSpec {
  std::size_t n_users = 100;
  std::size_t n_items = 100;
  std::size_t k_true = 8;
  std::size_t interactions_per_user = 100;
  double positive_rate = 0.3;   // target share of +1 labels per user
  double drift_fraction = 0.0;  // share of users whose preference vector walks
  double drift_step = 0.2;      // per-interaction random-walk scale
  double noise_level = 0.0;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  Corpus corpus;
  std::size_t k_true = 0;
  std::vector<double> true_user;  // n_users x k_true (initial vector for drifters)
  std::vector<double> true_item;  // n_items x k_true
  std::vector<std::uint8_t> drifting;
  std::uint64_t seed = 0;
};

/// Each user sees a random sample of distinct items at consecutive
/// timestamps; the label is +1 iff the (possibly drifting) true score plus
/// noise clears a per-user threshold calibrated to the target positive rate.
SynthCorpus generate(const SynthSpec& spec);

/// Ground-truth sidecar files (binary embeddings + drift flags); round-trip
/// bit-exactly.
void save_ground_truth(const SynthCorpus& synth, const std::filesystem::path& truth_path,
                       const std::filesystem::path& drift_path);
void load_ground_truth(SynthCorpus& synth, const std::filesystem::path& truth_path,
                       const std::filesystem::path& drift_path);

}  // namespace saros
