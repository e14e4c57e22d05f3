#pragma once

// Greedy coordinate gradient search over hard prompts.

#include <cstdint>
#include <vector>

#include "promptinv/optimizers/common.hpp"

namespace promptinv {

struct GcgConfig {
  int steps = 3000;
  // Clamped to |T| at run time.
  int top_k = 256;
  int batch_size = 512;
  int prompt_length = 16;
  std::uint64_t seed = 0;
  bool coverage_forcing = false;

  void validate() const {
    if (steps < 1) throw ValidationError("gcg: steps must be >= 1");
    if (top_k < 1) throw ValidationError("gcg: top_k must be >= 1");
    if (batch_size < 1) throw ValidationError("gcg: batch_size must be >= 1");
    if (prompt_length < 1) throw ValidationError("gcg: prompt_length must be >= 1");
  }
};

// Per step: rank replacement tokens at every position by the negative
// one-hot gradient, sample a batch of single swaps from each position's
// top-k, evaluate them exactly and move to the best one if it beats the
// incumbent.
template <DifferentiableObjective Objective>
OptimRun gcg_invert(const Objective& objective, const EmbeddingTable& table, const GcgConfig& cfg,
                    const StepObserver& observer = {}) {
  cfg.validate();
  if (objective.vocab_size() != table.size()) throw ValidationError("gcg: objective/table vocabulary mismatch");
  const std::size_t vocab = table.size();
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), vocab);

  OptimRun run;
  run.method = "gcg";
  Rng rng(derive_seed(cfg.seed, {1}));
  TokenSequence current = random_sequence(static_cast<std::size_t>(cfg.prompt_length), vocab, cfg.seed);
  double current_loss = objective.loss(current);
  run.evaluations = 1;
  run.record(0, current_loss, current, observer);

  std::vector<std::vector<TokenId>> pools(current.size());
  std::vector<double> negative(vocab);
  for (int step = 1; step <= cfg.steps; ++step) {
    const RowMatrix grad = objective.grad_onehot(current);
    if (!grad.allFinite()) {
      throw RuntimeFailure("gcg: non-finite gradient at step " + std::to_string(step));
    }
    for (std::size_t p = 0; p < current.size(); ++p) {
      for (std::size_t t = 0; t < vocab; ++t) {
        negative[t] = -grad(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t));
      }
      pools[p] = detail::top_k_tokens(negative, k);
    }
    const auto swaps = detail::draw_swaps(pools, static_cast<std::size_t>(cfg.batch_size), cfg.coverage_forcing, rng);
    const auto losses = evaluate_swaps(current, swaps, objective);
    run.evaluations += losses.size();
    const auto winner = detail::select_greedy(current_loss, losses, run.method, step);
    if (winner >= 0) {
      detail::apply_swap(current, swaps[static_cast<std::size_t>(winner)]);
      current_loss = losses[static_cast<std::size_t>(winner)];
    }
    run.record(step, current_loss, current, observer);
  }
  return run;
}

}  // namespace promptinv
