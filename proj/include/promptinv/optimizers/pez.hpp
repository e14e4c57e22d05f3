#pragma once

// Projected-gradient hard prompting: the gradient is taken at the
// projected hard prompt and applied to the soft iterate with Adam.

#include <cmath>
#include <cstdint>

#include "promptinv/optimizers/common.hpp"

namespace promptinv {

struct PezConfig {
  int steps = 3000;
  double learning_rate = 0.1;
  // Decoupled (AdamW-style) decay applied to the soft iterate.
  double weight_decay = 0.0;
  int prompt_length = 16;
  std::uint64_t seed = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (steps < 1) throw ValidationError("pez: steps must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("pez: learning_rate must be > 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ValidationError("pez: weight_decay must be >= 0");
    if (prompt_length < 1) throw ValidationError("pez: prompt_length must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw ValidationError("pez: invalid Adam constants");
    }
  }
};

// Trajectory step i holds the projected prompt of soft iterate i, for
// i = 0..steps.
template <DifferentiableObjective Objective>
OptimRun pez_invert(const Objective& objective, const EmbeddingTable& table, const PezConfig& cfg,
                    const StepObserver& observer = {}) {
  cfg.validate();
  if (objective.vocab_size() != table.size()) throw ValidationError("pez: objective/table vocabulary mismatch");

  OptimRun run;
  run.method = "pez";
  const TokenSequence init = random_sequence(static_cast<std::size_t>(cfg.prompt_length), table.size(), cfg.seed);
  SoftPrompt soft = embed(init, table);
  RowMatrix first_moment = RowMatrix::Zero(soft.rows(), soft.cols());
  RowMatrix second_moment = RowMatrix::Zero(soft.rows(), soft.cols());
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  for (int step = 0; step < cfg.steps; ++step) {
    const TokenSequence hard = project_to_vocab(soft, table);
    run.record(step, objective.loss(hard), hard, observer);
    ++run.evaluations;

    const RowMatrix grad = objective.grad_embeddings(hard);
    if (!grad.allFinite()) throw RuntimeFailure("pez: non-finite gradient at step " + std::to_string(step));

    beta1_power *= cfg.beta1;
    beta2_power *= cfg.beta2;
    first_moment = cfg.beta1 * first_moment + (1.0 - cfg.beta1) * grad;
    second_moment = cfg.beta2 * second_moment + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const RowMatrix m_hat = first_moment / (1.0 - beta1_power);
    const RowMatrix v_hat = second_moment / (1.0 - beta2_power);
    const RowMatrix update = m_hat.array() / (v_hat.array().sqrt() + cfg.epsilon);
    soft -= cfg.learning_rate * (update + cfg.weight_decay * soft);
    if (!soft.allFinite()) throw RuntimeFailure("pez: soft prompt diverged at step " + std::to_string(step));
  }
  const TokenSequence hard = project_to_vocab(soft, table);
  run.record(cfg.steps, objective.loss(hard), hard, observer);
  ++run.evaluations;
  return run;
}

}  // namespace promptinv
