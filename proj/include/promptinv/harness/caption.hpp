#pragma once

// Retrieval captioner baseline: the bank prompt whose encoding best matches
// the target under the objective.

#include <cstddef>
#include <limits>
#include <span>

#include "promptinv/error.hpp"
#include "promptinv/objective.hpp"

namespace promptinv::harness {

// Index of the minimum-loss bank entry; lowest index on ties. Entries whose
// encoding degenerates are skipped.
template <SequenceObjective Objective>
std::size_t retrieval_caption_index(std::span<const TokenSequence> bank, const Objective& objective) {
  if (bank.empty()) throw ValidationError("retrieval_caption: empty bank");
  std::size_t best = bank.size();
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double loss;
    try {
      loss = objective.loss(bank[i]);
    } catch (const DegenerateEncodingError&) {
      continue;
    }
    if (loss < best_loss) {
      best_loss = loss;
      best = i;
    }
  }
  if (best == bank.size()) throw RuntimeFailure("retrieval_caption: every bank entry degenerates");
  return best;
}

template <SequenceObjective Objective>
TokenSequence retrieval_caption(std::span<const TokenSequence> bank, const Objective& objective) {
  return bank[retrieval_caption_index(bank, objective)];
}

// Convenience overload taking the target latent directly.
inline TokenSequence retrieval_caption(const TargetLatent& target, std::span<const TokenSequence> bank,
                                       const TextEncoder& enc, const EmbeddingTable& table) {
  return retrieval_caption(bank, ClipObjective(table, enc, target));
}

}  // namespace promptinv::harness
