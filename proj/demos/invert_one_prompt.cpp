// Generates a noisy feature from a known prompt, inverts it with GCG and
// random search, and compares the recovered prompts with the original.

#include <iomanip>
#include <iostream>

#include "promptinv/promptinv.hpp"

int main() {
  using namespace promptinv;

  const EmbeddingTable table = harness::make_world_table();
  const TextEncoder encoder = TextEncoder::random(table.dim(), 16, 7);
  const SyntheticGenerator generator = build_generator(16, 64, 0.3, 11);

  const TokenSequence original = tokenize("a fluffy pink elephant in a misty forest , watercolor", table);
  Rng noise(42);
  const FeatureVector image = generate(generator, original, encoder, table, noise);
  const ClipObjective objective(table, encoder, image_encode(generator, image));

  GcgConfig gcg;
  gcg.steps = 300;
  gcg.top_k = 32;
  gcg.prompt_length = 8;
  RsConfig rs;
  rs.steps = 300;
  rs.prompt_length = 8;

  std::cout << std::fixed << std::setprecision(4);
  std::cout << std::left << std::setw(14) << "original" << " loss " << objective.loss(original) << "  " << detokenize(original, table) << '\n';
  for (const auto& run : {gcg_invert(objective, table, gcg), random_search_invert(objective, table, rs)}) {
    std::cout << std::left << std::setw(14) << run.method << " loss " << run.best_loss << "  "
              << detokenize(run.best_sequence, table) << "  (text similarity "
              << text_similarity(run.best_sequence, original, encoder, table) << ")\n";
  }
}
