#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "saros/common.hpp"
#include "saros/corpus.hpp"

namespace saros {

struct LossConfig {
  double lambda_reg = 0.0;  // weight of the squared-norm regularizer per pair
};

/// User and item embeddings in a shared k-dimensional latent space.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::size_t n_users, std::size_t n_items, std::size_t k,
              std::uint64_t seed = 0);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t k() const { return k_; }
  std::uint64_t seed() const { return seed_; }

  std::span<double> user(std::uint32_t u) { return {u_.data() + std::size_t(u) * k_, k_}; }
  std::span<const double> user(std::uint32_t u) const {
    return {u_.data() + std::size_t(u) * k_, k_};
  }
  std::span<double> item(std::uint32_t i) { return {v_.data() + std::size_t(i) * k_, k_}; }
  std::span<const double> item(std::uint32_t i) const {
    return {v_.data() + std::size_t(i) * k_, k_};
  }

  std::span<const double> user_matrix() const { return u_; }
  std::span<const double> item_matrix() const { return v_; }
  std::span<double> user_matrix() { return u_; }
  std::span<double> item_matrix() { return v_; }

  bool same_shape(const ModelParams& other) const {
    return n_users_ == other.n_users_ && n_items_ == other.n_items_ && k_ == other.k_;
  }

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> u_;
  std::vector<double> v_;
};

/// Entries i.i.d. uniform in [-scale, scale]; scale < 0 selects the default
/// 1/sqrt(k). Fully determined by seed.
ModelParams init_params(std::size_t n_users, std::size_t n_items, std::size_t k,
                        std::uint64_t seed, double scale = -1.0);

/// Dot product U_u . V_i.
double score(const ModelParams& params, std::uint32_t u, std::uint32_t i);

/// Regularized logistic pair loss
///   log(1 + exp(-y U_u.(V_i - V_j))) + lambda (|U_u|^2 + |V_i|^2 + |V_j|^2)
/// computed with an overflow-safe softplus.
double pair_loss(const ModelParams& params, const LossConfig& cfg, std::uint32_t u,
                 std::uint32_t i, std::uint32_t j, int y);

/// Mean pair loss over positives x negatives with y = +1.
double block_loss(const ModelParams& params, const LossConfig& cfg, const Block& block);

/// Gradient of block_loss for U_u and each touched item row. Rows outside
/// the block are zero and never materialized. loss carries the block loss
/// computed in the same pass.
struct BlockGradient {
  std::uint32_t user = 0;
  std::vector<double> user_grad;                                    // k
  std::vector<std::pair<std::uint32_t, std::vector<double>>> item_grads;
  double loss = 0.0;

  void reset(std::uint32_t u, std::size_t k);
};

void block_gradient(const ModelParams& params, const LossConfig& cfg, const Block& block,
                    BlockGradient& out);
BlockGradient block_gradient(const ModelParams& params, const LossConfig& cfg,
                             const Block& block);

/// Versioned binary checkpoint; round-trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

namespace detail {
/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}
/// Logistic function 1 / (1 + exp(-x)).
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace detail

}  // namespace saros
