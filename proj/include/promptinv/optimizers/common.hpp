#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "promptinv/error.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/rng.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv {

struct TrajectoryPoint {
  int step = 0;
  double loss = 0.0;
  TokenSequence sequence;
};

using StepObserver = std::function<void(const TrajectoryPoint&)>;

// Full record of one optimizer run. `best_*` is the minimum-loss hard
// prompt over the trajectory (first occurrence wins).
struct OptimRun {
  std::string method;
  std::vector<TrajectoryPoint> trajectory;
  double best_loss = std::numeric_limits<double>::infinity();
  TokenSequence best_sequence;
  std::uint64_t evaluations = 0;

  void record(int step, double loss, const TokenSequence& seq, const StepObserver& observer) {
    if (!trajectory.empty() && step <= trajectory.back().step) {
      throw RuntimeFailure(method + ": trajectory steps must increase");
    }
    trajectory.push_back({step, loss, seq});
    if (loss < best_loss) {
      best_loss = loss;
      best_sequence = seq;
    }
    if (observer) observer(trajectory.back());
  }
};

struct Swap {
  std::size_t position = 0;
  TokenId token = 0;

  friend bool operator==(const Swap&, const Swap&) = default;
};

// Uniform random hard prompt; shared initializer of the iterative methods.
inline TokenSequence random_sequence(std::size_t length, std::size_t vocab_size, std::uint64_t seed) {
  if (length < 1) throw ValidationError("prompt_length must be >= 1");
  Rng rng(seed);
  TokenSequence seq(length);
  for (auto& t : seq) t = static_cast<TokenId>(rng.uniform_index(vocab_size));
  return seq;
}

// Loss of `seq` with each single-token swap applied. The input is not
// modified. A swap whose encoding degenerates yields NaN.
template <SequenceObjective Objective>
std::vector<double> evaluate_swaps(std::span<const TokenId> seq, std::span<const Swap> swaps,
                                   const Objective& objective) {
  for (std::size_t i = 0; i < swaps.size(); ++i) {
    if (swaps[i].position >= seq.size() || swaps[i].token < 0 ||
        static_cast<std::size_t>(swaps[i].token) >= objective.vocab_size()) {
      throw ValidationError("evaluate_swaps: swap " + std::to_string(i) + " (position " +
                            std::to_string(swaps[i].position) + ", token " + std::to_string(swaps[i].token) +
                            ") out of range");
    }
  }
  TokenSequence scratch(seq.begin(), seq.end());
  std::vector<double> losses;
  losses.reserve(swaps.size());
  for (const auto& swap : swaps) {
    const TokenId saved = scratch[swap.position];
    scratch[swap.position] = swap.token;
    try {
      losses.push_back(objective.loss(scratch));
    } catch (const DegenerateEncodingError&) {
      losses.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    scratch[swap.position] = saved;
  }
  return losses;
}

namespace detail {

// Index of the winning candidate, or -1 to keep the incumbent. Strict
// improvement is required, so ties go to the incumbent and then to the
// lowest candidate index. Throws if no candidate has a finite loss.
inline std::ptrdiff_t select_greedy(double incumbent_loss, std::span<const double> losses, const std::string& method,
                                    int step) {
  std::ptrdiff_t winner = -1;
  double best = incumbent_loss;
  bool any_finite = losses.empty();
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) continue;
    any_finite = true;
    if (losses[i] < best) {
      best = losses[i];
      winner = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (!any_finite) {
    throw RuntimeFailure(method + ": every candidate loss was non-finite at step " + std::to_string(step));
  }
  return winner;
}

// The k highest-scoring token ids (score desc, id asc), returned in
// ascending id order.
inline std::vector<TokenId> top_k_tokens(std::span<const double> scores, std::size_t k) {
  k = std::min(k, scores.size());
  std::vector<TokenId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto better = [&scores](TokenId a, TokenId b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), better);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Candidate swaps for one greedy step. `pools[p]` lists the tokens allowed
// at position p (ascending ids). With coverage forcing and a batch at
// least as large as the universe, every (position, token) pair is
// enumerated in (position, id) order; with coverage forcing and a smaller
// batch, draws are made without replacement. Otherwise draws are
// independent: position uniform, then token uniform within the pool.
inline std::vector<Swap> draw_swaps(const std::vector<std::vector<TokenId>>& pools, std::size_t batch,
                                    bool coverage_forcing, Rng& rng) {
  std::size_t universe = 0;
  for (const auto& pool : pools) universe += pool.size();
  std::vector<Swap> out;
  if (universe == 0) return out;
  if (coverage_forcing && batch >= universe) {
    out.reserve(universe);
    for (std::size_t p = 0; p < pools.size(); ++p) {
      for (TokenId t : pools[p]) out.push_back({p, t});
    }
    return out;
  }
  out.reserve(batch);
  std::vector<std::vector<bool>> seen;
  if (coverage_forcing) {
    seen.resize(pools.size());
    for (std::size_t p = 0; p < pools.size(); ++p) seen[p].assign(pools[p].size(), false);
  }
  while (out.size() < batch) {
    const auto p = static_cast<std::size_t>(rng.uniform_index(pools.size()));
    if (pools[p].empty()) continue;
    const auto r = static_cast<std::size_t>(rng.uniform_index(pools[p].size()));
    if (coverage_forcing) {
      if (seen[p][r]) continue;
      seen[p][r] = true;
    }
    out.push_back({p, pools[p][r]});
  }
  return out;
}

inline void apply_swap(TokenSequence& seq, const Swap& swap) { seq[swap.position] = swap.token; }

}  // namespace detail
}  // namespace promptinv
