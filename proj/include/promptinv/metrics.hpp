#pragma once

// Distribution distances between feature sets (Frechet distance, unbiased
// kernel MMD) and the two cosine alignment scores.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "promptinv/error.hpp"
#include "promptinv/generator.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv {

struct MetricsReport {
  double fid = 0.0;
  double kid = 0.0;
  double clip_score = 0.0;
  double text_similarity = 0.0;
  std::size_t n_reference = 0;
  std::size_t n_generated = 0;
};

namespace detail {

inline void check_pair(const FeatureSet& a, const FeatureSet& b, const char* what) {
  if (a.cols() != b.cols()) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()) + ")");
  }
  if (a.rows() < 2 || b.rows() < 2) throw ValidationError(std::string(what) + ": need at least 2 samples per set");
  if (!a.allFinite() || !b.allFinite()) throw ValidationError(std::string(what) + ": non-finite features");
}

// Sample covariance with the n-1 denominator.
inline Eigen::MatrixXd covariance(const FeatureSet& x, const Eigen::RowVectorXd& mean) {
  const RowMatrix centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

// tr((A^{1/2} B A^{1/2})^{1/2}) with negative eigenvalues clamped to zero.
// Returns false if an eigendecomposition fails.
inline bool trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double& out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(a);
  if (eig_a.info() != Eigen::Success) return false;
  const Eigen::VectorXd roots = eig_a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = eig_a.eigenvectors() * roots.asDiagonal() * eig_a.eigenvectors().transpose();
  Eigen::MatrixXd product = sqrt_a * b * sqrt_a;
  product = 0.5 * (product + product.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_p(product, Eigen::EigenvaluesOnly);
  if (eig_p.info() != Eigen::Success) return false;
  out = eig_p.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return true;
}

}  // namespace detail

// Frechet distance between Gaussian fits of two feature sets:
// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^{1/2} S_b S_a^{1/2})^{1/2}).
// A 1e-6 diagonal jitter is added if a decomposition fails.
inline double fid(const FeatureSet& a, const FeatureSet& b) {
  detail::check_pair(a, b, "fid");
  const Eigen::RowVectorXd mean_a = a.colwise().mean();
  const Eigen::RowVectorXd mean_b = b.colwise().mean();
  Eigen::MatrixXd cov_a = detail::covariance(a, mean_a);
  Eigen::MatrixXd cov_b = detail::covariance(b, mean_b);
  double trace_sqrt = 0.0;
  if (!detail::trace_sqrt_product(cov_a, cov_b, trace_sqrt)) {
    const auto eye = Eigen::MatrixXd::Identity(cov_a.rows(), cov_a.cols());
    cov_a += 1e-6 * eye;
    cov_b += 1e-6 * eye;
    if (!detail::trace_sqrt_product(cov_a, cov_b, trace_sqrt)) {
      throw RuntimeFailure("fid: covariance square root failed after jitter");
    }
  }
  return (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
}

// Cubic polynomial kernel (x.y / dim + 1)^3.
inline double kid_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::Ref<const Eigen::RowVectorXd>& y) {
  const double base = x.dot(y) / static_cast<double>(x.size()) + 1.0;
  return base * base * base;
}

// Unbiased squared MMD with the cubic polynomial kernel.
inline double kid(const FeatureSet& a, const FeatureSet& b) {
  detail::check_pair(a, b, "kid");
  const Eigen::Index n = a.rows();
  const Eigen::Index p = b.rows();

  auto within = [](const FeatureSet& x) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < x.rows(); ++j) sum += kid_kernel(x.row(i), x.row(j));
    }
    const auto rows = static_cast<double>(x.rows());
    return 2.0 * sum / (rows * (rows - 1.0));
  };

  // The cross sum is accumulated in both loop orders and averaged so that
  // kid(a, b) == kid(b, a) bit for bit.
  double by_row = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) by_row += kid_kernel(a.row(i), b.row(j));
  }
  double by_col = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) by_col += kid_kernel(a.row(i), b.row(j));
  }
  const double cross = 0.5 * (by_row + by_col) / (static_cast<double>(n) * static_cast<double>(p));
  return within(a) + within(b) - 2.0 * cross;
}

// Raw cosine between the prompt's text latent and the feature's image
// latent (no 2.5x rescale).
inline double clip_score(std::span<const TokenId> seq, const FeatureVector& feature, const TextEncoder& enc,
                         const SyntheticGenerator& gen, const EmbeddingTable& table) {
  const Eigen::VectorXd text = enc.encode(embed(seq, table));
  const TargetLatent image = image_encode(gen, feature);
  if (text.size() != image.dim()) throw ValidationError("clip_score: latent dimension mismatch");
  return std::clamp(text.dot(image.vector()), -1.0, 1.0);
}

// Cosine between the text latents of two prompts. Mean pooling makes this
// invariant to token order.
inline double text_similarity(std::span<const TokenId> a, std::span<const TokenId> b, const TextEncoder& enc,
                              const EmbeddingTable& table) {
  const Eigen::VectorXd ua = enc.encode(embed(a, table));
  const Eigen::VectorXd ub = enc.encode(embed(b, table));
  return std::clamp(ua.dot(ub), -1.0, 1.0);
}

}  // namespace promptinv
