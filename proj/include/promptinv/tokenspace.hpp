#pragma once

// Vocabulary, embedding table, toy tokenizer, one-hot encoding and the
// nearest-row projection used by projected-gradient methods.

#include <Eigen/Core>

#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "promptinv/block_io.hpp"
#include "promptinv/error.hpp"

namespace promptinv {

using TokenId = int;
using TokenSequence = std::vector<TokenId>;
using SoftPrompt = RowMatrix;

inline constexpr TokenId kUnkId = 0;
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kTableMagic = "EMBT1";

// Immutable |T| x d table of token embeddings.
class EmbeddingTable {
 public:
  EmbeddingTable(std::vector<std::string> tokens, RowMatrix vectors)
      : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
    if (static_cast<Eigen::Index>(tokens_.size()) != vectors_.rows()) {
      throw ValidationError("embedding table: " + std::to_string(tokens_.size()) + " tokens but " +
                            std::to_string(vectors_.rows()) + " rows");
    }
    if (tokens_.empty()) throw ValidationError("embedding table: empty vocabulary");
    if (vectors_.cols() < 1) throw ValidationError("embedding table: dim must be >= 1");
    if (!vectors_.allFinite()) throw ValidationError("embedding table: non-finite entries");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw ValidationError("embedding table: duplicate token '" + tokens_[i] + "'");
      }
    }
    norms_ = vectors_.rowwise().norm();
    unit_rows_ = vectors_;
    for (Eigen::Index r = 0; r < unit_rows_.rows(); ++r) {
      if (norms_(r) > 0.0) unit_rows_.row(r) /= norms_(r);
    }
  }

  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return vectors_.cols(); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }
  [[nodiscard]] const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] const RowMatrix& vectors() const { return vectors_; }
  [[nodiscard]] const Eigen::VectorXd& row_norms() const { return norms_; }
  [[nodiscard]] const RowMatrix& unit_rows() const { return unit_rows_; }

  [[nodiscard]] bool contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  [[nodiscard]] std::optional<TokenId> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  RowMatrix vectors_;
  Eigen::VectorXd norms_;
  RowMatrix unit_rows_;
  std::unordered_map<std::string, TokenId> index_;
};

inline EmbeddingTable decode_embedding_table(std::string_view bytes) {
  auto block = decode_block(bytes, kTableMagic);
  try {
    return EmbeddingTable(std::move(block.labels), std::move(block.values));
  } catch (const ValidationError& e) {
    throw FormatError(std::string("EMBT: ") + e.what());
  }
}

inline EmbeddingTable load_embedding_table(const std::string& path) {
  return decode_embedding_table(read_file_bytes(path));
}

inline std::string encode_embedding_table(const EmbeddingTable& table) {
  return encode_block(kTableMagic, table.tokens(), table.vectors());
}

inline void save_embedding_table(const EmbeddingTable& table, const std::string& path) {
  write_file_bytes(path, encode_embedding_table(table));
}

inline void validate_sequence(std::span<const TokenId> seq, std::size_t vocab_size) {
  if (seq.empty()) throw ValidationError("token sequence must be non-empty");
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] < 0 || static_cast<std::size_t>(seq[i]) >= vocab_size) {
      throw ValidationError("token id " + std::to_string(seq[i]) + " at position " + std::to_string(i) +
                            " outside vocabulary of size " + std::to_string(vocab_size));
    }
  }
}

// Lowercased whitespace tokenizer. Unknown words map to <unk> (id 0) and
// empty input becomes the single-token sequence [0].
inline TokenSequence tokenize(std::string_view text, const EmbeddingTable& table) {
  if (table.token(kUnkId) != kUnkToken) {
    throw ValidationError("tokenize: table must hold <unk> at index 0");
  }
  TokenSequence out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    out.push_back(table.find(word).value_or(kUnkId));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  if (out.empty()) out.push_back(kUnkId);
  return out;
}

inline std::string detokenize(std::span<const TokenId> seq, const EmbeddingTable& table) {
  validate_sequence(seq, table.size());
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i > 0) out += ' ';
    out += table.token(seq[i]);
  }
  return out;
}

inline RowMatrix one_hot(std::span<const TokenId> seq, std::size_t vocab_size) {
  validate_sequence(seq, vocab_size);
  RowMatrix x = RowMatrix::Zero(static_cast<Eigen::Index>(seq.size()), static_cast<Eigen::Index>(vocab_size));
  for (std::size_t i = 0; i < seq.size(); ++i) x(static_cast<Eigen::Index>(i), seq[i]) = 1.0;
  return x;
}

// Row gather XE.
inline RowMatrix embed(std::span<const TokenId> seq, const EmbeddingTable& table) {
  validate_sequence(seq, table.size());
  RowMatrix out(static_cast<Eigen::Index>(seq.size()), table.dim());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = table.vectors().row(seq[i]);
  }
  return out;
}

// Nearest table row under cosine similarity, lowest id on ties. A zero
// query row has no direction, so it falls back to Euclidean distance.
// Zero-norm table rows are never cosine-nearest.
inline TokenId nearest_token(const Eigen::Ref<const Eigen::RowVectorXd>& query, const EmbeddingTable& table) {
  const double qnorm = query.norm();
  const auto vocab = static_cast<Eigen::Index>(table.size());
  TokenId best = -1;
  if (qnorm > 0.0) {
    const Eigen::VectorXd scores = table.unit_rows() * query.transpose();
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < vocab; ++t) {
      if (table.row_norms()(t) == 0.0) continue;
      if (scores(t) > best_score) {
        best_score = scores(t);
        best = static_cast<TokenId>(t);
      }
    }
    if (best >= 0) return best;
  }
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < vocab; ++t) {
    const double dist = (table.vectors().row(t) - query).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<TokenId>(t);
    }
  }
  return best;
}

inline TokenSequence project_to_vocab(const SoftPrompt& soft, const EmbeddingTable& table) {
  if (soft.cols() != table.dim()) {
    throw ValidationError("project_to_vocab: soft prompt has " + std::to_string(soft.cols()) +
                          " columns, table dim is " + std::to_string(table.dim()));
  }
  if (!soft.allFinite()) throw ValidationError("project_to_vocab: non-finite soft prompt");
  TokenSequence out(static_cast<std::size_t>(soft.rows()));
  for (Eigen::Index r = 0; r < soft.rows(); ++r) out[static_cast<std::size_t>(r)] = nearest_token(soft.row(r), table);
  return out;
}

}  // namespace promptinv
