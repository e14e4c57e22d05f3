#pragma once

// Next-token log-priors for prior-guided beam construction: a
// Laplace-smoothed bigram model and the uniform fallback.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "promptinv/error.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv {

inline double uniform_log_prob(std::size_t vocab_size) {
  if (vocab_size < 1) throw ValidationError("uniform_log_prob: vocab_size must be >= 1");
  return -std::log(static_cast<double>(vocab_size));
}

class BigramLM {
 public:
  BigramLM(std::size_t vocab_size, double alpha) : vocab_size_(vocab_size), alpha_(alpha), rows_(vocab_size),
                                                    row_totals_(vocab_size, 0), unigram_(vocab_size, 0) {
    if (vocab_size < 1) throw ValidationError("bigram: vocab_size must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("bigram: alpha must be > 0");
  }

  // Tallies one adjacent pair (prev -> next).
  void add_pair(TokenId prev, TokenId next) {
    check(prev);
    check(next);
    ++rows_[static_cast<std::size_t>(prev)][next];
    ++row_totals_[static_cast<std::size_t>(prev)];
  }

  void add_unigram(TokenId token) {
    check(token);
    ++unigram_[static_cast<std::size_t>(token)];
    ++unigram_total_;
  }

  [[nodiscard]] std::size_t vocab_size() const { return vocab_size_; }
  [[nodiscard]] double alpha() const { return alpha_; }

  [[nodiscard]] std::uint64_t count(TokenId prev, TokenId next) const {
    check(prev);
    check(next);
    const auto& row = rows_[static_cast<std::size_t>(prev)];
    auto it = row.find(next);
    return it == row.end() ? 0 : it->second;
  }

  [[nodiscard]] std::uint64_t unigram_count(TokenId token) const {
    check(token);
    return unigram_[static_cast<std::size_t>(token)];
  }

  // log p(token | context); only the last context token matters. An empty
  // context uses the smoothed unigram distribution.
  [[nodiscard]] double log_prob_next(std::span<const TokenId> context, TokenId token) const {
    check(token);
    const double smoothing = alpha_ * static_cast<double>(vocab_size_);
    if (context.empty()) {
      return std::log((static_cast<double>(unigram_[static_cast<std::size_t>(token)]) + alpha_) /
                      (static_cast<double>(unigram_total_) + smoothing));
    }
    const TokenId last = context.back();
    check(last);
    return std::log((static_cast<double>(count(last, token)) + alpha_) /
                    (static_cast<double>(row_totals_[static_cast<std::size_t>(last)]) + smoothing));
  }

  // log p(. | context) for the whole vocabulary.
  [[nodiscard]] std::vector<double> log_prob_row(std::span<const TokenId> context) const {
    const double smoothing = alpha_ * static_cast<double>(vocab_size_);
    std::vector<double> out(vocab_size_);
    if (context.empty()) {
      const double denom = static_cast<double>(unigram_total_) + smoothing;
      for (std::size_t t = 0; t < vocab_size_; ++t) {
        out[t] = std::log((static_cast<double>(unigram_[t]) + alpha_) / denom);
      }
      return out;
    }
    const TokenId last = context.back();
    check(last);
    const double denom = static_cast<double>(row_totals_[static_cast<std::size_t>(last)]) + smoothing;
    const double unseen = std::log(alpha_ / denom);
    std::fill(out.begin(), out.end(), unseen);
    for (const auto& [next, c] : rows_[static_cast<std::size_t>(last)]) {
      out[static_cast<std::size_t>(next)] = std::log((static_cast<double>(c) + alpha_) / denom);
    }
    return out;
  }

 private:
  void check(TokenId t) const {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      throw ValidationError("bigram: token id " + std::to_string(t) + " outside vocabulary of size " +
                            std::to_string(vocab_size_));
    }
  }

  std::size_t vocab_size_;
  double alpha_;
  std::vector<std::unordered_map<TokenId, std::uint64_t>> rows_;
  std::vector<std::uint64_t> row_totals_;
  std::vector<std::uint64_t> unigram_;
  std::uint64_t unigram_total_ = 0;
};

inline BigramLM train_bigram(std::span<const TokenSequence> corpus, std::size_t vocab_size, double alpha = 1.0) {
  BigramLM lm(vocab_size, alpha);
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      lm.add_unigram(seq[i]);
      if (i + 1 < seq.size()) lm.add_pair(seq[i], seq[i + 1]);
    }
  }
  return lm;
}

// Plain-text corpus, one prompt per line.
inline std::vector<TokenSequence> load_corpus(const std::string& path, const EmbeddingTable& table) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus " + path);
  std::vector<TokenSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(tokenize(line, table));
  }
  return out;
}

struct UniformPrior {
  std::size_t vocab_size;
};

// Either the uniform 1/|T| prior or a trained bigram model.
class LanguagePrior {
 public:
  static LanguagePrior uniform(std::size_t vocab_size) {
    uniform_log_prob(vocab_size);
    return LanguagePrior(UniformPrior{vocab_size});
  }
  static LanguagePrior bigram(BigramLM lm) { return LanguagePrior(std::move(lm)); }

  [[nodiscard]] bool is_uniform() const { return std::holds_alternative<UniformPrior>(model_); }

  [[nodiscard]] std::size_t vocab_size() const {
    return std::visit([](const auto& m) -> std::size_t {
      if constexpr (std::is_same_v<std::decay_t<decltype(m)>, UniformPrior>) {
        return m.vocab_size;
      } else {
        return m.vocab_size();
      }
    }, model_);
  }

  [[nodiscard]] double log_prob_next(std::span<const TokenId> context, TokenId token) const {
    if (const auto* u = std::get_if<UniformPrior>(&model_)) {
      if (token < 0 || static_cast<std::size_t>(token) >= u->vocab_size) {
        throw ValidationError("prior: token id out of range");
      }
      return uniform_log_prob(u->vocab_size);
    }
    return std::get<BigramLM>(model_).log_prob_next(context, token);
  }

  [[nodiscard]] std::vector<double> log_prob_row(std::span<const TokenId> context) const {
    if (const auto* u = std::get_if<UniformPrior>(&model_)) {
      return std::vector<double>(u->vocab_size, uniform_log_prob(u->vocab_size));
    }
    return std::get<BigramLM>(model_).log_prob_row(context);
  }

 private:
  explicit LanguagePrior(std::variant<UniformPrior, BigramLM> model) : model_(std::move(model)) {}
  std::variant<UniformPrior, BigramLM> model_;
};

}  // namespace promptinv
