#pragma once

// l0-ball random search: greedy acceptance over uniformly drawn
// single-token replacements.

#include <cstdint>
#include <numeric>
#include <vector>

#include "promptinv/optimizers/common.hpp"

namespace promptinv {

struct RsConfig {
  int steps = 3000;
  int batch_size = 512;
  int prompt_length = 16;
  std::uint64_t seed = 0;
  bool coverage_forcing = false;

  void validate() const {
    if (steps < 1) throw ValidationError("random search: steps must be >= 1");
    if (batch_size < 1) throw ValidationError("random search: batch_size must be >= 1");
    if (prompt_length < 1) throw ValidationError("random search: prompt_length must be >= 1");
  }
};

template <SequenceObjective Objective>
OptimRun random_search_invert(const Objective& objective, const EmbeddingTable& table, const RsConfig& cfg,
                              const StepObserver& observer = {}) {
  cfg.validate();
  if (objective.vocab_size() != table.size()) {
    throw ValidationError("random search: objective/table vocabulary mismatch");
  }
  const std::size_t vocab = table.size();

  OptimRun run;
  run.method = "random_search";
  Rng rng(derive_seed(cfg.seed, {2}));
  TokenSequence current = random_sequence(static_cast<std::size_t>(cfg.prompt_length), vocab, cfg.seed);
  double current_loss = objective.loss(current);
  run.evaluations = 1;
  run.record(0, current_loss, current, observer);

  std::vector<TokenId> all_tokens(vocab);
  std::iota(all_tokens.begin(), all_tokens.end(), 0);
  const std::vector<std::vector<TokenId>> pools(current.size(), all_tokens);

  for (int step = 1; step <= cfg.steps; ++step) {
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
