#pragma once

// Bundled desk-scale world: a ~200-word vocabulary with topic-clustered
// embeddings and a templated prompt generator producing image-prompt-like
// text ("a fluffy pink elephant in a misty forest , oil painting").

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "promptinv/block_io.hpp"
#include "promptinv/rng.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv::harness {

namespace world_words {

struct Topic {
  std::string_view name;
  std::vector<std::string_view> words;
};

inline const std::vector<Topic>& topics() {
  static const std::vector<Topic> kTopics = {
      {"animal", {"elephant", "cat", "dog", "fox", "owl", "horse", "tiger", "rabbit", "whale", "dragon",
                  "wolf", "deer", "bear", "lion", "panda", "eagle", "turtle", "octopus", "koala", "squirrel", "shark", "frog", "peacock", "butterfly", "unicorn"}},
      {"color", {"pink", "red", "blue", "green", "golden", "silver", "purple", "orange", "teal", "crimson",
                 "violet", "amber", "black", "white", "turquoise", "scarlet"}},
      {"place", {"forest", "desert", "city", "ocean", "mountain", "castle", "meadow", "cave", "island", "temple",
                 "village", "garden", "canyon", "glacier", "swamp", "library", "harbor", "volcano", "jungle", "valley", "beach",
                 "bridge", "tower", "river", "market"}},
      {"style", {"painting", "watercolor", "photograph", "sketch", "render", "illustration", "anime", "pixelart",
                 "lithograph", "mosaic", "sculpture", "tapestry", "etching", "poster", "cartoon", "impressionist"}},
      {"artist", {"monet", "rembrandt", "hokusai", "klimt", "turner", "vermeer", "picasso", "dali", "mucha",
                  "giger", "moebius", "ghibli"}},
      {"lighting", {"sunset", "moonlight", "neon", "dawn", "twilight", "foggy", "misty", "sunny", "stormy",
                    "glowing", "backlit", "candlelit", "overcast", "starry"}},
      {"mood", {"futuristic", "ancient", "cozy", "eerie", "majestic", "whimsical", "serene", "gloomy", "vibrant",
                "dreamy", "epic", "tiny", "giant", "fluffy", "ornate", "rustic"}},
      {"quality", {"photorealistic", "detailed", "trending", "artstation", "hd", "4k", "8k", "octane", "unreal",
                   "cinematic", "sharp", "masterpiece", "award-winning", "intricate", "highres", "bokeh"}},
      {"object", {"lantern", "teapot", "clock", "bicycle", "crown", "sword", "book", "umbrella", "violin", "kite",
                  "mirror", "ship", "robot", "balloon", "chair", "bottle", "telescope", "key", "candle", "acorn", "vase", "hat",
                  "feather", "shell", "lamp"}},
      {"action", {"flying", "sleeping", "dancing", "running", "reading", "swimming", "sitting", "floating",
                  "exploring", "playing", "wearing", "holding"}},
      {"function", {"a", "an", "the", "in", "of", "with", "on", "at", "by", "and", ",", "under", "over", "near",
                    "from", "style", "art", "very", "made", "inside", "behind", "through"}},
  };
  return kTopics;
}

}  // namespace world_words

struct WorldConfig {
  Eigen::Index embedding_dim = 32;
  std::uint64_t seed = 2024;
  // Spread of words around their topic center, relative to unit centers.
  double topic_spread = 0.7;
  // Weight of a direction shared by every row. Real token tables are
  // strongly anisotropic; this reproduces that.
  double shared_weight = 1.0;
};

// Table: "<unk>" at id 0, then every topic's words. Word vectors are topic
// center + Gaussian offset, rounded to float32 so EMBT round trips are
// exact.
inline EmbeddingTable make_world_table(const WorldConfig& cfg = {}) {
  Rng rng(derive_seed(cfg.seed, {0x7ab1e}));
  const auto d = cfg.embedding_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<std::string> tokens{std::string(kUnkToken)};
  std::vector<Eigen::RowVectorXd> rows;
  Eigen::RowVectorXd unk(d);
  for (Eigen::Index k = 0; k < d; ++k) unk(k) = 0.3 * scale * rng.normal();
  rows.push_back(unk);
  Eigen::RowVectorXd shared(d);
  for (Eigen::Index k = 0; k < d; ++k) shared(k) = cfg.shared_weight * scale * rng.normal();
  for (const auto& topic : world_words::topics()) {
    Eigen::RowVectorXd center(d);
    for (Eigen::Index k = 0; k < d; ++k) center(k) = scale * rng.normal();
    const bool function_words = topic.name == "function";
    for (auto word : topic.words) {
      Eigen::RowVectorXd v(d);
      for (Eigen::Index k = 0; k < d; ++k) {
        const double offset = cfg.topic_spread * scale * rng.normal();
        v(k) = shared(k) + (function_words ? 0.5 * (0.5 * center(k) + offset) : center(k) + offset);
      }
      tokens.emplace_back(word);
      rows.push_back(v);
    }
  }
  RowMatrix vectors(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      vectors(static_cast<Eigen::Index>(i), k) = static_cast<double>(static_cast<float>(rows[i](k)));
    }
  }
  return EmbeddingTable(std::move(tokens), std::move(vectors));
}

// Templated prompts over the world vocabulary; `count` distinct lines.
inline std::vector<std::string> make_world_prompts(std::size_t count, std::uint64_t seed) {
  const auto& topics = world_words::topics();
  auto words_of = [&topics](std::string_view name) -> const std::vector<std::string_view>& {
    for (const auto& t : topics) {
      if (t.name == name) return t.words;
    }
    throw ValidationError("unknown topic");
  };
  Rng rng(derive_seed(seed, {0xb4a4c}));
  auto pick = [&rng, &words_of](std::string_view topic) {
    const auto& w = words_of(topic);
    return std::string(w[rng.uniform_index(w.size())]);
  };
  auto maybe = [&rng](double p) { return rng.uniform01() < p; };

  std::set<std::string> seen;
  std::vector<std::string> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * 1000 + 1000) throw RuntimeFailure("prompt generator: vocabulary too small for count");
    std::string line;
    auto add = [&line](const std::string& w) {
      if (!line.empty()) line += ' ';
      line += w;
    };
    const bool object_subject = maybe(0.3);
    add(maybe(0.5) ? "a" : "the");
    if (maybe(0.6)) add(pick("mood"));
    if (maybe(0.7)) add(pick("color"));
    add(object_subject ? pick("object") : pick("animal"));
    if (!object_subject && maybe(0.4)) add(pick("action"));
    if (maybe(0.8)) {
      add(maybe(0.5) ? "in" : "near");
      add("a");
      if (maybe(0.4)) add(pick("lighting"));
      add(pick("place"));
    }
    if (maybe(0.7)) {
      add(",");
      add(pick("style"));
    }
    if (maybe(0.4)) {
      add("by");
      add(pick("artist"));
    }
    if (maybe(0.6)) {
      add(",");
      add(pick("quality"));
      if (maybe(0.5)) add(pick("quality"));
    }
    if (seen.insert(line).second) out.push_back(std::move(line));
  }
  return out;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace promptinv::harness
