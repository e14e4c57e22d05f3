#pragma once

// Central finite-difference check of the objective's analytic gradients on
// seeded random instances.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "promptinv/linalg.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/rng.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv {

struct GradcheckOptions {
  int instances = 20;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double tolerance = 1e-5;
  Eigen::Index max_dim = 16;
  std::size_t max_length = 8;
  std::size_t vocab_size = 24;
};

struct GradcheckInstance {
  EmbeddingTable table;
  TextEncoder encoder;
  TargetLatent target;
  TokenSequence sequence;
};

struct GradcheckCase {
  Eigen::Index dim = 0;
  Eigen::Index latent_dim = 0;
  std::size_t length = 0;
  double embedding_error = 0.0;
  double onehot_error = 0.0;
};

struct GradcheckResult {
  std::vector<GradcheckCase> cases;
  double max_embedding_error = 0.0;
  double max_onehot_error = 0.0;
  bool passed = true;
};

inline GradcheckInstance make_gradcheck_instance(std::uint64_t seed, const GradcheckOptions& opt = {}) {
  Rng rng(seed);
  const auto dim = static_cast<Eigen::Index>(2 + rng.uniform_index(static_cast<std::uint64_t>(opt.max_dim - 1)));
  const auto latent = static_cast<Eigen::Index>(2 + rng.uniform_index(static_cast<std::uint64_t>(dim - 1)));
  const auto length = static_cast<std::size_t>(1 + rng.uniform_index(opt.max_length));
  std::vector<std::string> tokens{std::string(kUnkToken)};
  for (std::size_t i = 1; i < opt.vocab_size; ++i) tokens.push_back("t" + std::to_string(i));
  RowMatrix vectors = gaussian_matrix(static_cast<Eigen::Index>(opt.vocab_size), dim, rng);
  EmbeddingTable table(std::move(tokens), std::move(vectors));
  auto encoder = TextEncoder::random(dim, latent, rng.next_u64());
  Eigen::VectorXd y(latent);
  for (Eigen::Index k = 0; k < latent; ++k) y(k) = rng.normal();
  TokenSequence seq(length);
  for (auto& t : seq) t = static_cast<TokenId>(rng.uniform_index(opt.vocab_size));
  return {std::move(table), std::move(encoder), TargetLatent::from_direction(y), std::move(seq)};
}

// max |analytic - numeric| / max |numeric|.
inline double relative_gradient_error(const RowMatrix& analytic, const RowMatrix& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-300);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

inline GradcheckCase check_gradients(const GradcheckInstance& inst, double h) {
  const ClipObjective objective(inst.table, inst.encoder, inst.target);
  const RowMatrix embedded = embed(inst.sequence, inst.table);

  RowMatrix numeric(embedded.rows(), embedded.cols());
  for (Eigen::Index i = 0; i < embedded.rows(); ++i) {
    for (Eigen::Index k = 0; k < embedded.cols(); ++k) {
      RowMatrix plus = embedded;
      RowMatrix minus = embedded;
      plus(i, k) += h;
      minus(i, k) -= h;
      numeric(i, k) = (objective.loss_embedded(plus) - objective.loss_embedded(minus)) / (2.0 * h);
    }
  }

  const RowMatrix x = one_hot(inst.sequence, inst.table.size());
  RowMatrix numeric_x(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      RowMatrix plus = x;
      RowMatrix minus = x;
      plus(i, j) += h;
      minus(i, j) -= h;
      const RowMatrix ep = plus * inst.table.vectors();
      const RowMatrix em = minus * inst.table.vectors();
      numeric_x(i, j) = (objective.loss_embedded(ep) - objective.loss_embedded(em)) / (2.0 * h);
    }
  }

  GradcheckCase out;
  out.dim = inst.table.dim();
  out.latent_dim = inst.encoder.latent_dim();
  out.length = inst.sequence.size();
  out.embedding_error = relative_gradient_error(objective.grad_embeddings(inst.sequence), numeric);
  out.onehot_error = relative_gradient_error(objective.grad_onehot(inst.sequence), numeric_x);
  return out;
}

inline GradcheckResult run_gradcheck(const GradcheckOptions& opt = {}) {
  if (opt.instances < 1 || !(opt.step > 0.0) || opt.max_dim < 2 || opt.max_length < 1 || opt.vocab_size < 2) {
    throw ValidationError("gradcheck: invalid options");
  }
  GradcheckResult result;
  for (int i = 0; i < opt.instances; ++i) {
    const auto inst = make_gradcheck_instance(derive_seed(opt.seed, {static_cast<std::uint64_t>(i)}), opt);
    const auto c = check_gradients(inst, opt.step);
    result.max_embedding_error = std::max(result.max_embedding_error, c.embedding_error);
    result.max_onehot_error = std::max(result.max_onehot_error, c.onehot_error);
    result.cases.push_back(c);
  }
  result.passed = result.max_embedding_error < opt.tolerance && result.max_onehot_error < opt.tolerance;
  return result;
}

}  // namespace promptinv
