#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "promptinv/generator.hpp"
#include "promptinv/linalg.hpp"

using namespace promptinv;

namespace {

EmbeddingTable random_table(std::size_t vocab, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> tokens{"<unk>"};
  for (std::size_t i = 1; i < vocab; ++i) tokens.push_back("w" + std::to_string(i));
  return EmbeddingTable(std::move(tokens), gaussian_matrix(static_cast<Eigen::Index>(vocab), dim, rng));
}

TokenSequence random_seq(std::size_t len, std::size_t vocab, Rng& rng) {
  TokenSequence s(len);
  for (auto& t : s) t = static_cast<TokenId>(rng.uniform_index(vocab));
  return s;
}

}  // namespace

TEST(BuildGenerator, ScalarLiftIsPlusOrMinusOne) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto gen = build_generator(1, 1, 0.0, seed);
    EXPECT_NEAR(std::abs(gen.lift()(0, 0)), 1.0, 1e-15);
  }
}

TEST(BuildGenerator, OrthonormalAndSeeded) {
  const auto a = build_generator(8, 32, 0.5, 3);
  EXPECT_LT(orthonormality_error(a.lift()), 1e-6);
  EXPECT_EQ(a.lift(), build_generator(8, 32, 0.5, 3).lift());
  EXPECT_NE(a.lift(), build_generator(8, 32, 0.5, 4).lift());
  EXPECT_EQ(a.latent_dim(), 8);
  EXPECT_EQ(a.feature_dim(), 32);
}

TEST(BuildGenerator, RejectsInvalidDimensionsAndSigma) {
  EXPECT_THROW(build_generator(0, 4, 0.0, 1), ValidationError);
  EXPECT_THROW(build_generator(5, 4, 0.0, 1), ValidationError);
  EXPECT_THROW(build_generator(2, 4, -0.1, 1), ValidationError);
  EXPECT_THROW(build_generator(2, 4, std::nan(""), 1), ValidationError);
  EXPECT_THROW(SyntheticGenerator(Eigen::MatrixXd::Ones(4, 2), 0.0), ValidationError);
}

TEST(Generate, NoiseFreeIsLiftTimesLatentAndRepeatable) {
  const auto table = random_table(20, 6, 1);
  const auto enc = TextEncoder::random(6, 4, 2);
  const auto gen = build_generator(4, 8, 0.0, 3);
  const TokenSequence x{1, 5, 9};
  Rng r1(1);
  Rng r2(99);
  const FeatureVector f1 = generate(gen, x, enc, table, r1);
  const FeatureVector f2 = generate(gen, x, enc, table, r2);
  EXPECT_EQ(f1, f2);
  EXPECT_EQ(f1, gen.lift() * enc.encode(embed(x, table)));
}

TEST(Generate, SameStreamSameFeature) {
  const auto table = random_table(20, 6, 1);
  const auto enc = TextEncoder::random(6, 4, 2);
  const auto gen = build_generator(4, 8, 0.7, 3);
  Rng a(derive_seed(5, {1, 2}));
  Rng b(derive_seed(5, {1, 2}));
  EXPECT_EQ(generate(gen, TokenSequence{2, 3}, enc, table, a), generate(gen, TokenSequence{2, 3}, enc, table, b));
  EXPECT_NE(generate(gen, TokenSequence{2, 3}, enc, table, a), generate(gen, TokenSequence{2, 3}, enc, table, a));
}

TEST(Generate, LatentDimensionMismatch) {
  const auto table = random_table(5, 6, 1);
  const auto enc = TextEncoder::random(6, 3, 2);
  const auto gen = build_generator(4, 8, 0.0, 3);
  Rng rng(1);
  EXPECT_THROW(generate(gen, TokenSequence{1}, enc, table, rng), ValidationError);
}

TEST(ImageEncode, NoiseFreeRoundTripRecoversTextLatent) {
  const auto table = random_table(30, 8, 4);
  const auto enc = TextEncoder::random(8, 4, 5);
  const auto gen = build_generator(4, 8, 0.0, 6);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_seq(1 + rng.uniform_index(6), 30, rng);
    const TargetLatent t = image_encode(gen, generate(gen, x, enc, table, rng));
    EXPECT_NEAR(t.vector().dot(enc.encode(embed(x, table))), 1.0, 1e-12);
    EXPECT_LT(clip_loss(x, t, enc, table), 1e-10);
  }
}

TEST(ImageEncode, LiftOfUnitVectorAndScaleInvariance) {
  const auto gen = build_generator(3, 7, 0.0, 1);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v(3);
    for (int k = 0; k < 3; ++k) v(k) = rng.normal();
    v.normalize();
    const FeatureVector f = gen.lift() * v;
    EXPECT_LT((image_encode(gen, f).vector() - v).norm(), 1e-12);
    EXPECT_LT((image_encode(gen, 5.0 * f).vector() - image_encode(gen, f).vector()).norm(), 1e-15);
  }
}

TEST(ImageEncode, Errors) {
  const auto gen = build_generator(2, 4, 0.0, 1);
  EXPECT_THROW(image_encode(gen, Eigen::VectorXd::Ones(3)), ValidationError);
  EXPECT_THROW(image_encode(gen, Eigen::VectorXd::Zero(4)), DegenerateEncodingError);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(4);
  bad(1) = std::nan("");
  EXPECT_THROW(image_encode(gen, bad), ValidationError);
}

TEST(Generate, ExpectedCosineFallsWithNoise) {
  const auto table = random_table(40, 8, 10);
  const auto enc = TextEncoder::random(8, 4, 11);
  double previous = 2.0;
  for (double sigma : {0.0, 0.1, 0.5, 1.0}) {
    const auto gen = build_generator(4, 8, sigma, 12);
    Rng rng(13);
    double total = 0.0;
    for (int i = 0; i < 500; ++i) {
      const auto x = random_seq(4, 40, rng);
      const TargetLatent t = image_encode(gen, generate(gen, x, enc, table, rng));
      total += t.vector().dot(enc.encode(embed(x, table)));
    }
    const double mean = total / 500.0;
    EXPECT_LT(mean, previous) << "sigma " << sigma;
    previous = mean;
  }
}

TEST(FeatureSet, BinaryRoundTrip) {
  Rng rng(3);
  // Values representable in single precision survive exactly.
  RowMatrix values = gaussian_matrix(7, 5, rng).cast<float>().cast<double>();
  const auto path = (std::filesystem::temp_directory_path() / "promptinv_test.feat").string();
  save_feature_set(values, path);
  const std::string bytes = read_file_bytes(path);
  const auto block = load_feature_set(path);
  EXPECT_EQ(block.values, values);
  ASSERT_EQ(block.labels.size(), 7u);
  EXPECT_EQ(block.labels[3], "f3");
  EXPECT_EQ(encode_feature_set(block.values, block.labels), bytes);

  write_file_bytes(path, bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_feature_set(path), FormatError);
  write_file_bytes(path, "EMBT1" + bytes.substr(5));
  EXPECT_THROW(load_feature_set(path), FormatError);
  std::filesystem::remove(path);
}
