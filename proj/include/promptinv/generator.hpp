#pragma once

// Synthetic stand-in for a stochastic text-to-image model: the text latent
// is lifted into a wider feature space by an orthonormal map and perturbed
// by isotropic Gaussian noise. `image_encode` maps features back to the
// text latent space.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "promptinv/block_io.hpp"
#include "promptinv/error.hpp"
#include "promptinv/linalg.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/rng.hpp"
#include "promptinv/tokenspace.hpp"

namespace promptinv {

using FeatureVector = Eigen::VectorXd;
// One feature per row.
using FeatureSet = RowMatrix;

inline constexpr std::string_view kFeatureMagic = "FEAT1";

class SyntheticGenerator {
 public:
  // `lift` is m' x m with orthonormal columns.
  SyntheticGenerator(Eigen::MatrixXd lift, double noise_sigma) : lift_(std::move(lift)), noise_sigma_(noise_sigma) {
    if (lift_.cols() < 1 || lift_.rows() < lift_.cols()) {
      throw ValidationError("generator: need m' >= m >= 1");
    }
    if (!(noise_sigma_ >= 0.0) || !std::isfinite(noise_sigma_)) throw ValidationError("generator: sigma must be >= 0");
    if (orthonormality_error(lift_) > 1e-6) throw ValidationError("generator: lift columns are not orthonormal");
  }

  [[nodiscard]] const Eigen::MatrixXd& lift() const { return lift_; }
  [[nodiscard]] double noise_sigma() const { return noise_sigma_; }
  [[nodiscard]] Eigen::Index latent_dim() const { return lift_.cols(); }
  [[nodiscard]] Eigen::Index feature_dim() const { return lift_.rows(); }

 private:
  Eigen::MatrixXd lift_;
  double noise_sigma_;
};

inline SyntheticGenerator build_generator(Eigen::Index m, Eigen::Index m_prime, double noise_sigma, std::uint64_t seed) {
  if (m < 1 || m_prime < m) {
    throw ValidationError("build_generator: need m' >= m >= 1, got m=" + std::to_string(m) +
                          " m'=" + std::to_string(m_prime));
  }
  if (!(noise_sigma >= 0.0)) throw ValidationError("build_generator: sigma must be >= 0");
  Rng rng(seed);
  return SyntheticGenerator(orthonormalize_columns(gaussian_matrix(m_prime, m, rng)), noise_sigma);
}

// lift * encode_text(embed(seq)) + sigma * g, g drawn from `rng`.
inline FeatureVector generate(const SyntheticGenerator& gen, std::span<const TokenId> seq, const TextEncoder& enc,
                              const EmbeddingTable& table, Rng& rng) {
  if (enc.latent_dim() != gen.latent_dim()) {
    throw ValidationError("generate: encoder latent dim " + std::to_string(enc.latent_dim()) +
                          " != generator latent dim " + std::to_string(gen.latent_dim()));
  }
  FeatureVector feature = gen.lift() * enc.encode(embed(seq, table));
  if (gen.noise_sigma() > 0.0) {
    for (Eigen::Index i = 0; i < feature.size(); ++i) feature(i) += gen.noise_sigma() * rng.normal();
  }
  return feature;
}

inline TargetLatent image_encode(const SyntheticGenerator& gen, const FeatureVector& feature) {
  if (feature.size() != gen.feature_dim()) {
    throw ValidationError("image_encode: feature has dim " + std::to_string(feature.size()) + ", expected " +
                          std::to_string(gen.feature_dim()));
  }
  if (!feature.allFinite()) throw ValidationError("image_encode: non-finite feature");
  const Eigen::VectorXd latent = gen.lift().transpose() * feature;
  const double norm = latent.norm();
  if (!(norm > 0.0)) throw DegenerateEncodingError("image_encode: zero projection");
  return TargetLatent(latent / norm);
}

inline std::string encode_feature_set(const FeatureSet& features, std::vector<std::string> labels = {}) {
  if (labels.empty()) {
    labels.reserve(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) labels.push_back("f" + std::to_string(i));
  }
  return encode_block(kFeatureMagic, labels, features);
}

inline void save_feature_set(const FeatureSet& features, const std::string& path, std::vector<std::string> labels = {}) {
  write_file_bytes(path, encode_feature_set(features, std::move(labels)));
}

inline LabeledBlock load_feature_set(const std::string& path) {
  auto block = decode_block(read_file_bytes(path), kFeatureMagic);
  if (!block.values.allFinite()) throw FormatError("FEAT1: non-finite features in " + path);
  return block;
}

}  // namespace promptinv
