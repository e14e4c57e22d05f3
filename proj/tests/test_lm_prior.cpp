#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "promptinv/lm_prior.hpp"
#include "promptinv/rng.hpp"

using namespace promptinv;

namespace {

std::vector<TokenSequence> random_corpus(std::size_t vocab, std::size_t lines, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenSequence> corpus(lines);
  for (auto& line : corpus) {
    line.resize(1 + rng.uniform_index(12));
    // Skewed draws so some pairs are frequent.
    for (auto& t : line) t = static_cast<TokenId>(rng.uniform_index(1 + rng.uniform_index(vocab)));
  }
  return corpus;
}

double row_mass(const BigramLM& lm, std::span<const TokenId> context) {
  double total = 0.0;
  for (std::size_t b = 0; b < lm.vocab_size(); ++b) total += std::exp(lm.log_prob_next(context, static_cast<TokenId>(b)));
  return total;
}

}  // namespace

TEST(UniformLogProb, ClosedForm) {
  EXPECT_EQ(uniform_log_prob(1), 0.0);
  EXPECT_NEAR(uniform_log_prob(2), -0.69314718055994531, 1e-15);
  EXPECT_THROW(uniform_log_prob(0), ValidationError);
}

TEST(TrainBigram, EmptyCorpusIsUniform) {
  for (std::size_t vocab = 1; vocab <= 20; ++vocab) {
    const auto lm = train_bigram({}, vocab, 1.0);
    for (TokenId a = 0; a < static_cast<TokenId>(vocab); ++a) {
      const TokenSequence ctx{a};
      for (TokenId b = 0; b < static_cast<TokenId>(vocab); ++b) {
        EXPECT_NEAR(lm.log_prob_next(ctx, b), uniform_log_prob(vocab), 1e-15);
      }
    }
    EXPECT_NEAR(lm.log_prob_next(TokenSequence{}, 0), uniform_log_prob(vocab), 1e-15);
  }
}

TEST(TrainBigram, HandCountCase) {
  const std::vector<TokenSequence> corpus{{0, 1}, {0, 1}};
  const auto lm = train_bigram(corpus, 2, 1.0);
  EXPECT_EQ(lm.count(0, 1), 2u);
  EXPECT_EQ(lm.count(1, 0), 0u);
  EXPECT_NEAR(std::exp(lm.log_prob_next(TokenSequence{0}, 1)), 0.75, 1e-15);
  EXPECT_NEAR(lm.log_prob_next(TokenSequence{1, 1, 0}, 1), std::log(0.75), 1e-15);
  // Unigram counts: two 0s and two 1s.
  EXPECT_NEAR(std::exp(lm.log_prob_next(TokenSequence{}, 0)), 0.5, 1e-15);
}

TEST(TrainBigram, RejectsBadArguments) {
  EXPECT_THROW(train_bigram({}, 3, 0.0), ValidationError);
  EXPECT_THROW(train_bigram({}, 0, 1.0), ValidationError);
  const std::vector<TokenSequence> bad{{0, 5}};
  EXPECT_THROW(train_bigram(bad, 3, 1.0), ValidationError);
  const auto lm = train_bigram({}, 3, 1.0);
  EXPECT_THROW((void)lm.log_prob_next(TokenSequence{0}, 3), ValidationError);
}

TEST(BigramLM, EveryContextNormalizes) {
  for (std::size_t vocab : {1u, 2u, 7u, 50u}) {
    for (double alpha : {0.01, 1.0, 3.5}) {
      const auto corpus = random_corpus(vocab, 40, vocab * 31 + static_cast<std::size_t>(alpha * 10));
      const auto lm = train_bigram(corpus, vocab, alpha);
      EXPECT_NEAR(row_mass(lm, TokenSequence{}), 1.0, 1e-9);
      for (TokenId a = 0; a < static_cast<TokenId>(vocab); ++a) {
        EXPECT_NEAR(row_mass(lm, TokenSequence{a}), 1.0, 1e-9) << "vocab " << vocab << " context " << a;
      }
    }
  }
}

TEST(BigramLM, RowMatchesPointQueries) {
  const auto lm = train_bigram(random_corpus(15, 30, 4), 15, 0.5);
  for (TokenId a = 0; a < 15; ++a) {
    const TokenSequence ctx{3, a};
    const auto row = lm.log_prob_row(ctx);
    for (TokenId b = 0; b < 15; ++b) EXPECT_EQ(row[static_cast<std::size_t>(b)], lm.log_prob_next(ctx, b));
  }
  const auto bos = lm.log_prob_row(TokenSequence{});
  for (TokenId b = 0; b < 15; ++b) EXPECT_EQ(bos[static_cast<std::size_t>(b)], lm.log_prob_next(TokenSequence{}, b));
}

TEST(BigramLM, ExtraCountNeverLowersPairProbability) {
  Rng rng(5);
  auto lm = train_bigram(random_corpus(10, 20, 6), 10, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = static_cast<TokenId>(rng.uniform_index(10));
    const auto b = static_cast<TokenId>(rng.uniform_index(10));
    const double before = lm.log_prob_next(TokenSequence{a}, b);
    lm.add_pair(a, b);
    EXPECT_GE(lm.log_prob_next(TokenSequence{a}, b), before);
  }
}

TEST(BigramLM, MatchesDenseCountOracle) {
  const std::size_t vocab = 12;
  const double alpha = 0.7;
  const auto corpus = random_corpus(vocab, 25, 8);
  std::vector<std::vector<double>> counts(vocab, std::vector<double>(vocab, 0.0));
  for (const auto& line : corpus) {
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      counts[static_cast<std::size_t>(line[i])][static_cast<std::size_t>(line[i + 1])] += 1.0;
    }
  }
  const auto lm = train_bigram(corpus, vocab, alpha);
  for (std::size_t a = 0; a < vocab; ++a) {
    const double total = std::accumulate(counts[a].begin(), counts[a].end(), 0.0);
    for (std::size_t b = 0; b < vocab; ++b) {
      const double expected = std::log((counts[a][b] + alpha) / (total + alpha * static_cast<double>(vocab)));
      EXPECT_NEAR(lm.log_prob_next(TokenSequence{static_cast<TokenId>(a)}, static_cast<TokenId>(b)), expected, 1e-14);
    }
  }
}

TEST(LanguagePrior, UniformVariantIsConstant) {
  const auto prior = LanguagePrior::uniform(9);
  EXPECT_TRUE(prior.is_uniform());
  EXPECT_EQ(prior.vocab_size(), 9u);
  for (TokenId b = 0; b < 9; ++b) {
    EXPECT_EQ(prior.log_prob_next(TokenSequence{}, b), -std::log(9.0));
    EXPECT_EQ(prior.log_prob_next(TokenSequence{4, 2}, b), -std::log(9.0));
  }
  EXPECT_THROW((void)prior.log_prob_next(TokenSequence{}, 9), ValidationError);
  EXPECT_EQ(prior.log_prob_row(TokenSequence{1}).size(), 9u);
}

TEST(LanguagePrior, UniformMatchesEmptyCorpusBigram) {
  for (std::size_t vocab = 1; vocab <= 20; ++vocab) {
    const auto uniform = LanguagePrior::uniform(vocab);
    const auto bigram = LanguagePrior::bigram(train_bigram({}, vocab, 1.0));
    EXPECT_FALSE(bigram.is_uniform());
    for (TokenId a = 0; a < static_cast<TokenId>(vocab); ++a) {
      for (TokenId b = 0; b < static_cast<TokenId>(vocab); ++b) {
        EXPECT_NEAR(uniform.log_prob_next(TokenSequence{a}, b), bigram.log_prob_next(TokenSequence{a}, b), 1e-15);
      }
    }
  }
}

TEST(LoadCorpus, TokenizesNonBlankLines) {
  RowMatrix v(3, 1);
  v << 1, 2, 3;
  const EmbeddingTable table({"<unk>", "pink", "cat"}, v);
  const auto path = std::filesystem::temp_directory_path() / "promptinv_corpus.txt";
  {
    std::ofstream out(path);
    out << "pink cat\n\n   \nCAT dog\n";
  }
  const auto corpus = load_corpus(path.string(), table);
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus[0], (TokenSequence{1, 2}));
  EXPECT_EQ(corpus[1], (TokenSequence{2, 0}));
  std::filesystem::remove(path);
  EXPECT_THROW(load_corpus(path.string(), table), ValidationError);
}
