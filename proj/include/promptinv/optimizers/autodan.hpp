#pragma once

// Left-to-right prompt construction with beam search. Each step appends a
// provisional token, scores every vocabulary entry by negative one-hot
// gradient plus weighted log-prior, and evaluates the top-k extensions
// exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "promptinv/lm_prior.hpp"
#include "promptinv/optimizers/common.hpp"

namespace promptinv {

struct AutoDanConfig {
  int max_tokens = 16;
  // Clamped to |T| at run time.
  int top_k = 128;
  int beam_width = 5;
  double prior_weight = 1.0;
  TokenSequence prefix;
  // Token appended to score the next position before it is chosen.
  TokenId provisional_token = kUnkId;
  std::uint64_t seed = 0;

  // Alternative preset: 4 beams of 128 candidates, matching a 512-wide
  // fine search per step.
  static AutoDanConfig four_beam_preset() {
    AutoDanConfig cfg;
    cfg.beam_width = 4;
    cfg.top_k = 128;
    return cfg;
  }

  void validate() const {
    if (max_tokens < 1) throw ValidationError("autodan: max_tokens must be >= 1");
    if (top_k < 1) throw ValidationError("autodan: top_k must be >= 1");
    if (beam_width < 1) throw ValidationError("autodan: beam_width must be >= 1");
    if (!std::isfinite(prior_weight)) throw ValidationError("autodan: prior_weight must be finite");
  }
};

// Coarse candidate set for extending `context` by one token: the top_k
// tokens by score = -dL/dX[last, t] + w * log p(t | context), returned in
// ascending id order.
template <DifferentiableObjective Objective>
std::vector<TokenId> autodan_candidates(const Objective& objective, const LanguagePrior& prior,
                                        std::span<const TokenId> context, const AutoDanConfig& cfg) {
  const std::size_t vocab = objective.vocab_size();
  TokenSequence extended(context.begin(), context.end());
  extended.push_back(cfg.provisional_token);
  const RowMatrix grad = objective.grad_onehot(extended);
  if (!grad.allFinite()) throw RuntimeFailure("autodan: non-finite gradient");
  const std::vector<double> log_prior = prior.log_prob_row(context);
  std::vector<double> scores(vocab);
  const Eigen::Index last = grad.rows() - 1;
  for (std::size_t t = 0; t < vocab; ++t) {
    scores[t] = -grad(last, static_cast<Eigen::Index>(t)) + cfg.prior_weight * log_prior[t];
  }
  return detail::top_k_tokens(scores, std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), vocab));
}

template <DifferentiableObjective Objective>
OptimRun autodan_invert(const Objective& objective, const EmbeddingTable& table, const LanguagePrior& prior,
                        const AutoDanConfig& cfg, const StepObserver& observer = {}) {
  cfg.validate();
  const std::size_t vocab = table.size();
  if (objective.vocab_size() != vocab || prior.vocab_size() != vocab) {
    throw ValidationError("autodan: objective/table/prior vocabulary mismatch");
  }
  if (!table.contains(cfg.provisional_token)) throw ValidationError("autodan: provisional token out of range");
  for (TokenId t : cfg.prefix) {
    if (!table.contains(t)) throw ValidationError("autodan: prefix token out of range");
  }

  struct Entry {
    TokenSequence seq;
    double loss;
  };

  OptimRun run;
  run.method = "autodan";
  std::vector<Entry> beam{{cfg.prefix, std::numeric_limits<double>::quiet_NaN()}};

  for (int step = 1; step <= cfg.max_tokens; ++step) {
    std::vector<Entry> pool;
    for (const auto& element : beam) {
      const auto candidates = autodan_candidates(objective, prior, element.seq, cfg);
      TokenSequence extension = element.seq;
      extension.push_back(kUnkId);
      for (TokenId t : candidates) {
        extension.back() = t;
        double loss = std::numeric_limits<double>::quiet_NaN();
        try {
          loss = objective.loss(extension);
        } catch (const DegenerateEncodingError&) {
        }
        ++run.evaluations;
        if (std::isfinite(loss)) pool.push_back({extension, loss});
      }
    }
    if (pool.empty()) throw RuntimeFailure("autodan: beam emptied at step " + std::to_string(step));
    std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) { return a.loss < b.loss; });
    pool.resize(std::min(pool.size(), static_cast<std::size_t>(cfg.beam_width)));
    beam = std::move(pool);
    run.record(step, beam.front().loss, beam.front().seq, observer);
  }
  return run;
}

}  // namespace promptinv
