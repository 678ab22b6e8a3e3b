#include "saros/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace saros {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'R', 'S', 'C', 'K', 'P', 'T', '1'};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
  return s;
}

double sq_norm(std::span<const double> a) { return dot(a, a); }

void check_user(const ModelParams& p, std::uint32_t u) {
  if (u >= p.n_users()) {
    throw DataError("user index " + std::to_string(u) + " out of range (n_users=" +
                    std::to_string(p.n_users()) + ")");
  }
}

void check_item(const ModelParams& p, std::uint32_t i) {
  if (i >= p.n_items()) {
    throw DataError("item index " + std::to_string(i) + " out of range (n_items=" +
                    std::to_string(p.n_items()) + ")");
  }
}

}  // namespace

ModelParams::ModelParams(std::size_t n_users, std::size_t n_items, std::size_t k,
                         std::uint64_t seed)
    : n_users_(n_users),
      n_items_(n_items),
      k_(k),
      seed_(seed),
      u_(n_users * k, 0.0),
      v_(n_items * k, 0.0) {
  if (k == 0) throw ConfigError("latent dimension k must be >= 1");
}

ModelParams init_params(std::size_t n_users, std::size_t n_items, std::size_t k,
                        std::uint64_t seed, double scale) {
  ModelParams params(n_users, n_items, k, seed);
  if (scale < 0.0) scale = 1.0 / std::sqrt(static_cast<double>(k));
  Rng rng(seed);
  for (double& x : params.user_matrix()) x = rng.uniform(-scale, scale);
  for (double& x : params.item_matrix()) x = rng.uniform(-scale, scale);
  return params;
}

double score(const ModelParams& params, std::uint32_t u, std::uint32_t i) {
  check_user(params, u);
  check_item(params, i);
  return dot(params.user(u), params.item(i));
}

double pair_loss(const ModelParams& params, const LossConfig& cfg, std::uint32_t u,
                 std::uint32_t i, std::uint32_t j, int y) {
  check_user(params, u);
  check_item(params, i);
  check_item(params, j);
  const auto uu = params.user(u);
  const auto vi = params.item(i);
  const auto vj = params.item(j);
  double margin = 0.0;
  for (std::size_t d = 0; d < uu.size(); ++d) margin += uu[d] * (vi[d] - vj[d]);
  return detail::softplus(-double(y) * margin) +
         cfg.lambda_reg * (sq_norm(uu) + sq_norm(vi) + sq_norm(vj));
}

double block_loss(const ModelParams& params, const LossConfig& cfg, const Block& block) {
  if (block.positives.empty() || block.negatives.empty()) {
    throw DataError("block must have non-empty positives and negatives");
  }
  double sum = 0.0;
  for (const std::uint32_t i : block.positives) {
    for (const std::uint32_t j : block.negatives) {
      sum += pair_loss(params, cfg, block.user, i, j, +1);
    }
  }
  return sum / (static_cast<double>(block.positives.size()) *
                static_cast<double>(block.negatives.size()));
}

void BlockGradient::reset(std::uint32_t u, std::size_t k) {
  user = u;
  user_grad.assign(k, 0.0);
  item_grads.clear();
  loss = 0.0;
}

void block_gradient(const ModelParams& params, const LossConfig& cfg, const Block& block,
                    BlockGradient& out) {
  if (block.positives.empty() || block.negatives.empty()) {
    throw DataError("block must have non-empty positives and negatives");
  }
  check_user(params, block.user);
  const std::size_t k = params.k();
  out.reset(block.user, k);
  const auto uu = params.user(block.user);

  // Touched item rows in block order: positives first, then negatives.
  const std::size_t n_pos = block.positives.size();
  const std::size_t n_neg = block.negatives.size();
  out.item_grads.reserve(n_pos + n_neg);
  for (const std::uint32_t i : block.positives) {
    check_item(params, i);
    out.item_grads.emplace_back(i, std::vector<double>(k, 0.0));
  }
  for (const std::uint32_t j : block.negatives) {
    check_item(params, j);
    out.item_grads.emplace_back(j, std::vector<double>(k, 0.0));
  }

  const double inv_pairs = 1.0 / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  double loss_sum = 0.0;
  for (std::size_t a = 0; a < n_pos; ++a) {
    const auto vi = params.item(block.positives[a]);
    auto& gi = out.item_grads[a].second;
    for (std::size_t b = 0; b < n_neg; ++b) {
      const auto vj = params.item(block.negatives[b]);
      auto& gj = out.item_grads[n_pos + b].second;
      double margin = 0.0;
      for (std::size_t d = 0; d < k; ++d) margin += uu[d] * (vi[d] - vj[d]);
      loss_sum += detail::softplus(-margin) +
                  cfg.lambda_reg * (sq_norm(uu) + sq_norm(vi) + sq_norm(vj));
      // d/dm log(1+e^-m) = -sigmoid(-m)
      const double coef = -detail::sigmoid(-margin) * inv_pairs;
      const double reg = 2.0 * cfg.lambda_reg * inv_pairs;
      for (std::size_t d = 0; d < k; ++d) {
        out.user_grad[d] += coef * (vi[d] - vj[d]) + reg * uu[d];
        gi[d] += coef * uu[d] + reg * vi[d];
        gj[d] += -coef * uu[d] + reg * vj[d];
      }
    }
  }
  out.loss = loss_sum / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

BlockGradient block_gradient(const ModelParams& params, const LossConfig& cfg,
                             const Block& block) {
  BlockGradient out;
  block_gradient(params, cfg, block, out);
  return out;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t header[4] = {params.n_users(), params.n_items(), params.k(),
                                   params.seed()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  const auto u = params.user_matrix();
  const auto v = params.item_matrix();
  out.write(reinterpret_cast<const char*>(u.data()),
            static_cast<std::streamsize>(u.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path.string());
  }
  std::uint64_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in) throw DataError("truncated checkpoint header: " + path.string());
  ModelParams params(header[0], header[1], header[2], header[3]);
  auto u = params.user_matrix();
  auto v = params.item_matrix();
  in.read(reinterpret_cast<char*>(u.data()),
          static_cast<std::streamsize>(u.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw DataError("truncated checkpoint payload: " + path.string());
  return params;
}

}  // namespace saros
