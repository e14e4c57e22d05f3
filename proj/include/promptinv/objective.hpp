#pragma once

// Embedding-space surrogate objective: a mean-pool + linear text encoder
// and the loss 1 - cos(encode(XE), y) with analytic gradients.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "promptinv/error.hpp"
#include "promptinv/linalg.hpp"
#include "promptinv/rng.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv {

// d x m weight with orthonormal columns.
class TextEncoder {
 public:
  explicit TextEncoder(Eigen::MatrixXd weight) : weight_(std::move(weight)) {
    if (weight_.cols() < 1 || weight_.cols() > weight_.rows()) {
      throw ValidationError("text encoder: need 1 <= m <= d, got d=" + std::to_string(weight_.rows()) +
                            " m=" + std::to_string(weight_.cols()));
    }
    if (!weight_.allFinite() || orthonormality_error(weight_) > 1e-6) {
      throw ValidationError("text encoder: weight columns are not orthonormal");
    }
  }

  static TextEncoder random(Eigen::Index input_dim, Eigen::Index latent_dim, std::uint64_t seed) {
    if (latent_dim < 1 || latent_dim > input_dim) {
      throw ValidationError("text encoder: need 1 <= m <= d");
    }
    Rng rng(seed);
    return TextEncoder(orthonormalize_columns(gaussian_matrix(input_dim, latent_dim, rng)));
  }

  [[nodiscard]] const Eigen::MatrixXd& weight() const { return weight_; }
  [[nodiscard]] Eigen::Index input_dim() const { return weight_.rows(); }
  [[nodiscard]] Eigen::Index latent_dim() const { return weight_.cols(); }

  // normalize(W^T mean_rows(embedded))
  [[nodiscard]] Eigen::VectorXd encode(const RowMatrix& embedded) const {
    if (embedded.rows() < 1) throw ValidationError("encode_text: empty input");
    if (embedded.cols() != input_dim()) {
      throw ValidationError("encode_text: input has " + std::to_string(embedded.cols()) + " columns, encoder expects " +
                            std::to_string(input_dim()));
    }
    const Eigen::VectorXd pooled = embedded.colwise().mean().transpose();
    Eigen::VectorXd z = weight_.transpose() * pooled;
    const double norm = z.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateEncodingError("encode_text: zero encoding");
    return z / norm;
  }

 private:
  Eigen::MatrixXd weight_;
};

inline Eigen::VectorXd encode_text(const RowMatrix& embedded, const TextEncoder& enc) { return enc.encode(embedded); }

// Unit-norm target latent.
class TargetLatent {
 public:
  explicit TargetLatent(Eigen::VectorXd v) : v_(std::move(v)) {
    if (v_.size() < 1 || !v_.allFinite() || std::abs(v_.norm() - 1.0) > 1e-6) {
      throw ValidationError("target latent must be a finite unit vector");
    }
  }

  static TargetLatent from_direction(const Eigen::VectorXd& v) {
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateEncodingError("target latent: zero direction");
    return TargetLatent(v / norm);
  }

  [[nodiscard]] const Eigen::VectorXd& vector() const { return v_; }
  [[nodiscard]] Eigen::Index dim() const { return v_.size(); }

 private:
  Eigen::VectorXd v_;
};

// Minimal contract the search methods need: exact loss of a hard sequence.
template <class O>
concept SequenceObjective = requires(const O& o, std::span<const TokenId> x) {
  { o.vocab_size() } -> std::convertible_to<std::size_t>;
  { o.loss(x) } -> std::convertible_to<double>;
};

// Gradient-guided methods additionally need d loss / d(XE) and d loss / dX.
template <class O>
concept DifferentiableObjective = SequenceObjective<O> && requires(const O& o, std::span<const TokenId> x) {
  { o.grad_embeddings(x) } -> std::convertible_to<RowMatrix>;
  { o.grad_onehot(x) } -> std::convertible_to<RowMatrix>;
};

// L(x) = 1 - cos(encode(XE), y). Holds non-owning references to the table
// and encoder; both must outlive the objective.
class ClipObjective {
 public:
  ClipObjective(const EmbeddingTable& table, const TextEncoder& encoder, TargetLatent target)
      : table_(&table), encoder_(&encoder), target_(std::move(target)) {
    if (encoder.input_dim() != table.dim()) {
      throw ValidationError("objective: encoder input dim " + std::to_string(encoder.input_dim()) +
                            " != table dim " + std::to_string(table.dim()));
    }
    if (encoder.latent_dim() != target_.dim()) {
      throw ValidationError("objective: target dim " + std::to_string(target_.dim()) + " != latent dim " +
                            std::to_string(encoder.latent_dim()));
    }
    projected_ = table.vectors() * encoder.weight();
  }

  [[nodiscard]] std::size_t vocab_size() const { return table_->size(); }
  [[nodiscard]] const EmbeddingTable& table() const { return *table_; }
  [[nodiscard]] const TextEncoder& encoder() const { return *encoder_; }
  [[nodiscard]] const TargetLatent& target() const { return target_; }

  // Hard-sequence loss. Uses the pre-projected table E W, so it never
  // materializes the s x d embedding; cosine is invariant to the 1/s of
  // the mean, which is therefore skipped. Rows are summed in token-id
  // order so that permutations of one multiset, which tie exactly under
  // mean pooling, also tie in floating point.
  [[nodiscard]] double loss(std::span<const TokenId> seq) const {
    validate_sequence(seq, table_->size());
    constexpr std::size_t kStackTokens = 64;
    std::array<TokenId, kStackTokens> stack_ids{};
    std::vector<TokenId> heap_ids;
    std::span<TokenId> ids(stack_ids.data(), std::min(seq.size(), kStackTokens));
    if (seq.size() > kStackTokens) {
      heap_ids.assign(seq.begin(), seq.end());
      ids = heap_ids;
    } else {
      std::copy(seq.begin(), seq.end(), ids.begin());
    }
    std::sort(ids.begin(), ids.end());
    const Eigen::Index m = projected_.cols();
    constexpr Eigen::Index kStackDims = 256;
    std::array<double, kStackDims> stack{};
    std::vector<double> heap;
    double* z = stack.data();
    if (m > kStackDims) {
      heap.assign(static_cast<std::size_t>(m), 0.0);
      z = heap.data();
    }
    for (TokenId t : ids) {
      const double* row = projected_.data() + static_cast<Eigen::Index>(t) * m;
      for (Eigen::Index k = 0; k < m; ++k) z[k] += row[k];
    }
    double sq = 0.0;
    double dot = 0.0;
    const double* y = target_.vector().data();
    for (Eigen::Index k = 0; k < m; ++k) {
      sq += z[k] * z[k];
      dot += z[k] * y[k];
    }
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateEncodingError("clip_loss: zero encoding");
    return std::clamp(1.0 - dot / norm, 0.0, 2.0);
  }

  // Loss of an arbitrary s x d embedding (soft prompt).
  [[nodiscard]] double loss_embedded(const RowMatrix& embedded) const {
    const Eigen::VectorXd u = encoder_->encode(embedded);
    return std::clamp(1.0 - u.dot(target_.vector()), 0.0, 2.0);
  }

  // Analytic gradient with respect to the s x d embedding. Every row is
  // identical because pooling is a uniform mean.
  [[nodiscard]] RowMatrix grad_embedded(const RowMatrix& embedded) const {
    const Eigen::RowVectorXd row = pooled_gradient_row(embedded);
    return row.replicate(embedded.rows(), 1);
  }

  [[nodiscard]] RowMatrix grad_embeddings(std::span<const TokenId> seq) const { return grad_embedded(embed(seq, *table_)); }

  // Chain rule through XE: dL/dX = (dL/d(XE)) E^T.
  [[nodiscard]] RowMatrix grad_onehot(std::span<const TokenId> seq) const {
    const RowMatrix embedded = embed(seq, *table_);
    const Eigen::RowVectorXd row = pooled_gradient_row(embedded);
    const Eigen::RowVectorXd onehot_row = row * table_->vectors().transpose();
    return onehot_row.replicate(embedded.rows(), 1);
  }

 private:
  // dL/d(row_i) = (1/s) W dL/dz, dL/dz = -(y - c u) / |z|.
  [[nodiscard]] Eigen::RowVectorXd pooled_gradient_row(const RowMatrix& embedded) const {
    if (embedded.rows() < 1 || embedded.cols() != table_->dim()) {
      throw ValidationError("objective gradient: embedding shape mismatch");
    }
    const Eigen::VectorXd pooled = embedded.colwise().mean().transpose();
    const Eigen::VectorXd z = encoder_->weight().transpose() * pooled;
    const double norm = z.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateEncodingError("clip_loss gradient: zero encoding");
    const Eigen::VectorXd u = z / norm;
    const Eigen::VectorXd& y = target_.vector();
    const Eigen::VectorXd dz = -(y - u.dot(y) * u) / norm;
    const Eigen::VectorXd dpooled = encoder_->weight() * dz;
    return dpooled.transpose() / static_cast<double>(embedded.rows());
  }

  const EmbeddingTable* table_;
  const TextEncoder* encoder_;
  TargetLatent target_;
  RowMatrix projected_;
};

static_assert(DifferentiableObjective<ClipObjective>);

inline double clip_loss(std::span<const TokenId> seq, const TargetLatent& target, const TextEncoder& enc,
                        const EmbeddingTable& table) {
  return ClipObjective(table, enc, target).loss(seq);
}

inline double clip_loss(const SoftPrompt& soft, const TargetLatent& target, const TextEncoder& enc,
                        const EmbeddingTable& table) {
  return ClipObjective(table, enc, target).loss_embedded(soft);
}

inline RowMatrix grad_wrt_embeddings(std::span<const TokenId> seq, const TargetLatent& target, const TextEncoder& enc,
                                     const EmbeddingTable& table) {
  return ClipObjective(table, enc, target).grad_embeddings(seq);
}

inline RowMatrix grad_wrt_onehot(std::span<const TokenId> seq, const TargetLatent& target, const TextEncoder& enc,
                                 const EmbeddingTable& table) {
  return ClipObjective(table, enc, target).grad_onehot(seq);
}

}  // namespace promptinv
