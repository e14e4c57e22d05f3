#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "promptinv/gradcheck.hpp"
#include "promptinv/linalg.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/rng.hpp"

using namespace promptinv;

namespace {

EmbeddingTable random_table(std::size_t vocab, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> tokens{"<unk>"};
  for (std::size_t i = 1; i < vocab; ++i) tokens.push_back("w" + std::to_string(i));
  return EmbeddingTable(std::move(tokens), gaussian_matrix(static_cast<Eigen::Index>(vocab), dim, rng));
}

TargetLatent random_target(Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(m);
  for (Eigen::Index k = 0; k < m; ++k) v(k) = rng.normal();
  return TargetLatent::from_direction(v);
}

// Loop-only reference: mean-pool, project, normalize, 1 - cos.
double straight_line_loss(const std::vector<std::vector<double>>& rows, const Eigen::MatrixXd& w,
                          const std::vector<double>& y) {
  const std::size_t d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k] / static_cast<double>(rows.size());
  }
  std::vector<double> z(y.size(), 0.0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    for (std::size_t k = 0; k < d; ++k) z[j] += w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * mean[k];
  }
  double zz = 0.0;
  double zy = 0.0;
  double yy = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    zz += z[j] * z[j];
    zy += z[j] * y[j];
    yy += y[j] * y[j];
  }
  return 1.0 - zy / (std::sqrt(zz) * std::sqrt(yy));
}

}  // namespace

TEST(TextEncoder, RandomHasOrthonormalColumnsAndIsSeeded) {
  const auto a = TextEncoder::random(12, 5, 3);
  const auto b = TextEncoder::random(12, 5, 3);
  const auto c = TextEncoder::random(12, 5, 4);
  EXPECT_LT(orthonormality_error(a.weight()), 1e-12);
  EXPECT_EQ(a.weight(), b.weight());
  EXPECT_NE(a.weight(), c.weight());
  EXPECT_THROW(TextEncoder::random(3, 4, 1), ValidationError);
  EXPECT_THROW(TextEncoder(Eigen::MatrixXd::Ones(3, 2)), ValidationError);
}

TEST(EncodeText, HandCase) {
  Eigen::MatrixXd w(2, 1);
  w << 1, 0;
  const TextEncoder enc(w);
  RowMatrix rows(2, 2);
  rows << 2, 5, 4, 9;
  const Eigen::VectorXd out = encode_text(rows, enc);
  ASSERT_EQ(out.size(), 1);
  EXPECT_EQ(out(0), 1.0);
}

TEST(EncodeText, SingleRowAndDuplicatedRows) {
  const auto enc = TextEncoder::random(6, 3, 8);
  Rng rng(2);
  const RowMatrix v = gaussian_matrix(1, 6, rng);
  const Eigen::VectorXd expected = (enc.weight().transpose() * v.transpose()).normalized();
  EXPECT_LT((encode_text(v, enc) - expected).norm(), 1e-14);

  const RowMatrix rows = gaussian_matrix(3, 6, rng);
  RowMatrix doubled(6, 6);
  doubled << rows, rows;
  EXPECT_LT((encode_text(rows, enc) - encode_text(doubled, enc)).norm(), 1e-14);
}

TEST(EncodeText, ZeroProjectionIsDegenerate) {
  Eigen::MatrixXd w(2, 1);
  w << 1, 0;
  const TextEncoder enc(w);
  RowMatrix rows(1, 2);
  rows << 0, 3;
  EXPECT_THROW(encode_text(rows, enc), DegenerateEncodingError);
}

TEST(TargetLatent, RequiresUnitNorm) {
  EXPECT_THROW(TargetLatent(Eigen::Vector2d(1, 1)), ValidationError);
  EXPECT_NO_THROW(TargetLatent(Eigen::Vector2d(0.6, 0.8)));
  EXPECT_THROW(TargetLatent::from_direction(Eigen::Vector2d(0, 0)), DegenerateEncodingError);
}

TEST(ClipLoss, ZeroAtOwnEncodingAndTwoAtAntipode) {
  const auto table = random_table(20, 8, 1);
  const auto enc = TextEncoder::random(8, 4, 2);
  const TokenSequence x{3, 7, 11};
  const Eigen::VectorXd u = encode_text(embed(x, table), enc);
  EXPECT_NEAR(clip_loss(x, TargetLatent(u), enc, table), 0.0, 1e-12);
  EXPECT_NEAR(clip_loss(x, TargetLatent(-u), enc, table), 2.0, 1e-12);
}

TEST(ClipLoss, MatchesStraightLineOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto table = random_table(15, 7, seed);
    const auto enc = TextEncoder::random(7, 3, seed + 100);
    const auto target = random_target(3, seed + 200);
    Rng rng(seed + 300);
    TokenSequence x(3);
    for (auto& t : x) t = static_cast<TokenId>(rng.uniform_index(15));
    std::vector<std::vector<double>> rows;
    for (TokenId t : x) {
      std::vector<double> r;
      for (Eigen::Index k = 0; k < 7; ++k) r.push_back(table.vectors()(t, k));
      rows.push_back(r);
    }
    const std::vector<double> y(target.vector().data(), target.vector().data() + 3);
    const double oracle = straight_line_loss(rows, enc.weight(), y);
    EXPECT_NEAR(clip_loss(x, target, enc, table), oracle, 1e-13);
    EXPECT_NEAR(clip_loss(SoftPrompt(embed(x, table)), target, enc, table), oracle, 1e-13);
  }
}

TEST(ClipLoss, AlwaysWithinBounds) {
  const auto table = random_table(30, 6, 5);
  const auto enc = TextEncoder::random(6, 2, 6);
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto target = random_target(2, 1000 + static_cast<std::uint64_t>(trial));
    TokenSequence x(1 + rng.uniform_index(5));
    for (auto& t : x) t = static_cast<TokenId>(rng.uniform_index(30));
    const double l = clip_loss(x, target, enc, table);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
}

TEST(ClipLoss, DimensionChecks) {
  const auto table = random_table(5, 4, 1);
  EXPECT_THROW(ClipObjective(table, TextEncoder::random(5, 2, 1), random_target(2, 1)), ValidationError);
  EXPECT_THROW(ClipObjective(table, TextEncoder::random(4, 2, 1), random_target(3, 1)), ValidationError);
  const ClipObjective obj(table, TextEncoder::random(4, 2, 1), random_target(2, 1));
  EXPECT_THROW((void)obj.loss(TokenSequence{5}), ValidationError);
  EXPECT_THROW((void)obj.loss(TokenSequence{}), ValidationError);
}

TEST(ClipLoss, SameEncoderSeedSameLosses) {
  const auto table = random_table(12, 6, 1);
  const auto target = random_target(3, 2);
  const ClipObjective a(table, TextEncoder::random(6, 3, 42), target);
  const auto enc_b = TextEncoder::random(6, 3, 42);
  const ClipObjective b(table, enc_b, target);
  for (TokenId t = 0; t < 12; ++t) EXPECT_EQ(a.loss(TokenSequence{t, 3}), b.loss(TokenSequence{t, 3}));
}

TEST(Gradients, VanishAtGlobalMinimum) {
  const auto table = random_table(20, 10, 3);
  const auto enc = TextEncoder::random(10, 4, 4);
  const TokenSequence x{1, 5, 9, 13};
  const TargetLatent target(encode_text(embed(x, table), enc));
  EXPECT_LT(grad_wrt_embeddings(x, target, enc, table).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(grad_wrt_onehot(x, target, enc, table).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Gradients, FiniteDifferenceOracle) {
  GradcheckOptions opt;
  opt.instances = 20;
  opt.seed = 77;
  for (int i = 0; i < opt.instances; ++i) {
    const auto inst = make_gradcheck_instance(derive_seed(opt.seed, {static_cast<std::uint64_t>(i)}), opt);
    ASSERT_LE(inst.table.dim(), 16);
    ASSERT_LE(inst.sequence.size(), 8u);
    const auto c = check_gradients(inst, 1e-4);
    EXPECT_LT(c.embedding_error, 1e-5) << "instance " << i;
    EXPECT_LT(c.onehot_error, 1e-4) << "instance " << i;
  }
}

TEST(Gradients, PooledGradientOrthogonalToEncodedDirection) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto table = random_table(15, 9, seed);
    const auto enc = TextEncoder::random(9, 5, seed + 1);
    const auto target = random_target(5, seed + 2);
    const TokenSequence x{1, 2, 3, 4};
    const RowMatrix g = grad_wrt_embeddings(x, target, enc, table);
    // Pull the pooled gradient into latent space and compare with u.
    const Eigen::VectorXd pooled = g.colwise().sum().transpose();
    const Eigen::VectorXd latent_grad = enc.weight().transpose() * pooled;
    const Eigen::VectorXd u = encode_text(embed(x, table), enc);
    EXPECT_LE(std::abs(latent_grad.dot(u)), 1e-8);
  }
}

TEST(Gradients, OneHotEqualsEmbeddingGradientTimesTableTranspose) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto table = random_table(25, 8, seed);
    const auto enc = TextEncoder::random(8, 3, seed + 9);
    const auto target = random_target(3, seed + 19);
    const TokenSequence x{0, 24, 12};
    const RowMatrix ge = grad_wrt_embeddings(x, target, enc, table);
    const RowMatrix gx = grad_wrt_onehot(x, target, enc, table);
    EXPECT_LT((gx - ge * table.vectors().transpose()).cwiseAbs().maxCoeff(), 1e-10);
    // Entry (i, x_i) is the directional derivative along the token's own row.
    for (Eigen::Index i = 0; i < 3; ++i) {
      EXPECT_NEAR(gx(i, x[static_cast<std::size_t>(i)]), ge.row(i).dot(table.vectors().row(x[static_cast<std::size_t>(i)])),
                  1e-14);
    }
  }
}

TEST(Gradcheck, RunnerPassesOnDefaults) {
  const auto result = run_gradcheck();
  EXPECT_TRUE(result.passed);
  EXPECT_EQ(result.cases.size(), 20u);
  EXPECT_THROW(run_gradcheck(GradcheckOptions{.instances = 0}), ValidationError);
}

TEST(ClipLoss, PermutedSequencesTieExactly) {
  const auto table = random_table(40, 9, 12);
  const auto enc = TextEncoder::random(9, 5, 13);
  const ClipObjective obj(table, enc, random_target(5, 14));
  Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSequence x(2 + rng.uniform_index(70));
    for (auto& t : x) t = static_cast<TokenId>(rng.uniform_index(40));
    TokenSequence y = x;
    for (std::size_t i = y.size() - 1; i > 0; --i) std::swap(y[i], y[rng.uniform_index(i + 1)]);
    EXPECT_EQ(obj.loss(x), obj.loss(y));
  }
}
