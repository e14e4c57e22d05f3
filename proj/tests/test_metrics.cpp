#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "promptinv/linalg.hpp"
#include "promptinv/metrics.hpp"

using namespace promptinv;

namespace {

RowMatrix gaussian_set(Eigen::Index n, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, Rng& rng) {
  RowMatrix x(n, mean.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < mean.size(); ++k) x(i, k) = mean(k) + sd(k) * rng.normal();
  }
  return x;
}

EmbeddingTable random_table(std::size_t vocab, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> tokens{"<unk>"};
  for (std::size_t i = 1; i < vocab; ++i) tokens.push_back("w" + std::to_string(i));
  return EmbeddingTable(std::move(tokens), gaussian_matrix(static_cast<Eigen::Index>(vocab), dim, rng));
}

double straight_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    ab += a(i) * b(i);
    aa += a(i) * a(i);
    bb += b(i) * b(i);
  }
  return ab / std::sqrt(aa * bb);
}

Eigen::VectorXd mean_pool_project(const TokenSequence& x, const EmbeddingTable& table, const TextEncoder& enc) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(table.dim());
  for (TokenId t : x) mean += table.vectors().row(t).transpose();
  return enc.weight().transpose() * (mean / static_cast<double>(x.size()));
}

}  // namespace

TEST(Fid, IdenticalSetsAreZero) {
  Rng rng(1);
  const RowMatrix a = gaussian_matrix(40, 6, rng);
  EXPECT_LT(std::abs(fid(a, a)), 1e-6);
}

TEST(Fid, PointMassesGiveSquaredMeanDistance) {
  RowMatrix a(3, 3);
  RowMatrix b(4, 3);
  a.rowwise() = Eigen::RowVector3d(1.0, 2.0, -1.0);
  b.rowwise() = Eigen::RowVector3d(4.0, -2.0, -1.0);
  EXPECT_EQ(fid(a, b), 25.0);
}

TEST(Fid, SampledDiagonalGaussiansMatchClosedForm) {
  Eigen::Vector4d mu_a(0.0, 0.0, 0.0, 0.0);
  Eigen::Vector4d mu_b(2.0, -2.0, 1.0, 0.0);
  Eigen::Vector4d sd_a(1.0, std::sqrt(2.0), std::sqrt(0.5), 1.0);
  Eigen::Vector4d sd_b(std::sqrt(2.0), 1.0, 1.0, 0.5);
  // Diagonal covariances commute: trace term is sum (sd_a - sd_b)^2.
  const double expected = (mu_a - mu_b).squaredNorm() + (sd_a - sd_b).squaredNorm();
  Rng rng(2);
  const RowMatrix a = gaussian_set(5000, mu_a, sd_a, rng);
  const RowMatrix b = gaussian_set(5000, mu_b, sd_b, rng);
  EXPECT_NEAR(fid(a, b), expected, 0.05 * expected);
}

TEST(Fid, SymmetricAndRotationInvariant) {
  Rng rng(3);
  const RowMatrix a = gaussian_matrix(30, 5, rng);
  const RowMatrix b = gaussian_matrix(25, 5, rng).array() * 2.0 + 1.0;
  EXPECT_NEAR(fid(a, b), fid(b, a), 1e-9);
  const Eigen::MatrixXd q = orthonormalize_columns(gaussian_matrix(5, 5, rng));
  EXPECT_NEAR(fid(a * q, b * q), fid(a, b), 1e-6);
}

TEST(Fid, Errors) {
  EXPECT_THROW(fid(RowMatrix::Zero(3, 2), RowMatrix::Zero(3, 3)), ValidationError);
  EXPECT_THROW(fid(RowMatrix::Zero(1, 2), RowMatrix::Zero(3, 2)), ValidationError);
  RowMatrix bad = RowMatrix::Zero(3, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(fid(bad, RowMatrix::Zero(3, 2)), ValidationError);
}

TEST(Kid, ThreeByThreeHandCase) {
  RowMatrix a(3, 2);
  RowMatrix b(3, 2);
  a << 0, 0, 1, 0, 0, 1;
  b << 1, 1, 2, 0, 0, 2;
  // k(x, y) = (x.y / 2 + 1)^3
  // within a: 1 + 1 + 1 = 3 -> 2 * 3 / 6 = 1
  // within b: 8 + 8 + 1 = 17 -> 17 / 3
  // cross: 3 + 12.375 + 12.375 = 27.75 -> 27.75 / 9 = 37 / 12
  // 1 + 17/3 - 37/6 = 0.5
  EXPECT_NEAR(kid(a, b), 0.5, 1e-12);
}

TEST(Kid, ExactlySymmetric) {
  Rng rng(4);
  const RowMatrix a = gaussian_matrix(17, 6, rng);
  const RowMatrix b = gaussian_matrix(23, 6, rng);
  EXPECT_EQ(kid(a, b), kid(b, a));
}

TEST(Kid, SameDistributionCentredOnZero) {
  Rng rng(5);
  std::vector<double> values;
  for (int trial = 0; trial < 100; ++trial) {
    values.push_back(kid(gaussian_matrix(40, 8, rng), gaussian_matrix(40, 8, rng)));
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / 100.0;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double se = std::sqrt(sq / 99.0) / 10.0;
  EXPECT_LT(std::abs(mean), 3.0 * se);

  const double spread = std::abs(*std::max_element(values.begin(), values.end(), [](double x, double y) {
    return std::abs(x) < std::abs(y);
  }));
  RowMatrix far = gaussian_matrix(40, 8, rng).array() + 10.0;
  const double separated = kid(gaussian_matrix(40, 8, rng), far);
  EXPECT_GT(separated, 0.0);
  EXPECT_GT(separated, spread);
}

TEST(Kid, Errors) {
  EXPECT_THROW(kid(RowMatrix::Zero(3, 2), RowMatrix::Zero(3, 3)), ValidationError);
  EXPECT_THROW(kid(RowMatrix::Zero(3, 2), RowMatrix::Zero(1, 2)), ValidationError);
}

TEST(ClipScore, NoiseFreeIsOneAndOrthogonalIsZero) {
  const auto table = random_table(20, 8, 1);
  const auto enc = TextEncoder::random(8, 4, 2);
  const auto gen = build_generator(4, 8, 0.0, 3);
  const TokenSequence x{2, 7, 11};
  Rng rng(4);
  EXPECT_NEAR(clip_score(x, generate(gen, x, enc, table, rng), enc, gen, table), 1.0, 1e-10);

  const Eigen::VectorXd u = enc.encode(embed(x, table));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  v(0) = 1.0;
  v -= v.dot(u) * u;
  EXPECT_NEAR(clip_score(x, gen.lift() * v, enc, gen, table), 0.0, 1e-12);
}

TEST(ClipScore, MatchesStraightLineOracle) {
  const auto table = random_table(25, 10, 5);
  const auto enc = TextEncoder::random(10, 5, 6);
  const auto gen = build_generator(5, 12, 0.4, 7);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    TokenSequence x(1 + rng.uniform_index(5));
    for (auto& t : x) t = static_cast<TokenId>(rng.uniform_index(25));
    Eigen::VectorXd feature(12);
    for (int k = 0; k < 12; ++k) feature(k) = rng.normal();
    const Eigen::VectorXd image = gen.lift().transpose() * feature;
    EXPECT_NEAR(clip_score(x, feature, enc, gen, table), straight_cosine(mean_pool_project(x, table, enc), image),
                1e-12);
  }
}

TEST(TextSimilarity, IdentityPermutationAndOracle) {
  const auto table = random_table(30, 8, 9);
  const auto enc = TextEncoder::random(8, 4, 10);
  const TokenSequence a{1, 2, 3, 4, 5};
  const TokenSequence shuffled{5, 3, 1, 4, 2};
  EXPECT_NEAR(text_similarity(a, a, enc, table), 1.0, 1e-12);
  EXPECT_NEAR(text_similarity(a, shuffled, enc, table), 1.0, 1e-12);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSequence x(1 + rng.uniform_index(6));
    TokenSequence y(1 + rng.uniform_index(6));
    for (auto& t : x) t = static_cast<TokenId>(rng.uniform_index(30));
    for (auto& t : y) t = static_cast<TokenId>(rng.uniform_index(30));
    const double s = text_similarity(x, y, enc, table);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(s, straight_cosine(mean_pool_project(x, table, enc), mean_pool_project(y, table, enc)), 1e-12);
  }
}

TEST(Bounds, CosineMetricsOnThousandRandomInputs) {
  const auto table = random_table(12, 3, 12);
  const auto enc = TextEncoder::random(3, 2, 13);
  const auto gen = build_generator(2, 3, 1.0, 14);
  Rng rng(15);
  for (int trial = 0; trial < 1000; ++trial) {
    TokenSequence x(1 + rng.uniform_index(4));
    TokenSequence y(1 + rng.uniform_index(4));
    for (auto& t : x) t = static_cast<TokenId>(rng.uniform_index(12));
    for (auto& t : y) t = static_cast<TokenId>(rng.uniform_index(12));
    const double c = clip_score(x, generate(gen, y, enc, table, rng), enc, gen, table);
    const double s = text_similarity(x, y, enc, table);
    EXPECT_TRUE(c >= -1.0 && c <= 1.0);
    EXPECT_TRUE(s >= -1.0 && s <= 1.0);
  }
}

TEST(Metrics, PureFunctions) {
  Rng rng(16);
  const RowMatrix a = gaussian_matrix(10, 4, rng);
  const RowMatrix b = gaussian_matrix(12, 4, rng);
  EXPECT_EQ(fid(a, b), fid(a, b));
  EXPECT_EQ(kid(a, b), kid(a, b));
}
