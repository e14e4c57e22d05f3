#pragma once

// End-to-end inversion benchmark on the synthetic world: sample prompts,
// generate reference features, invert each reference with every enabled
// method, regenerate from the inverted prompts and score.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "promptinv/generator.hpp"
#include "promptinv/harness/caption.hpp"
#include "promptinv/harness/config.hpp"
#include "promptinv/harness/synthetic_world.hpp"
#include "promptinv/lm_prior.hpp"
#include "promptinv/metrics.hpp"
#include "promptinv/objective.hpp"
#include "promptinv/optimizers.hpp"

namespace promptinv::harness {

inline constexpr std::string_view kMethodPez = "pez";
inline constexpr std::string_view kMethodGcg = "gcg";
inline constexpr std::string_view kMethodRandomSearch = "random_search";
inline constexpr std::string_view kMethodAutoDan = "autodan";
inline constexpr std::string_view kMethodCaption = "caption";

struct RunRecord {
  std::string method;
  int prompt_id = 0;
  int ref_id = 0;
  double best_loss = std::numeric_limits<double>::quiet_NaN();
  TokenSequence best_sequence;
  std::string best_text;
  std::uint64_t evaluations = 0;
  std::vector<std::pair<int, double>> trajectory;
  std::string error;
};

// One (method, prompt) row. Failed rows carry NaN metrics and an error.
struct MetricRow {
  std::string method;
  int prompt_id = 0;
  MetricsReport metrics;
  std::string error;
};

struct BenchmarkReport {
  ExperimentConfig config;
  std::vector<MetricRow> rows;
  std::vector<RunRecord> runs;
  // Not part of the deterministic outputs.
  std::map<std::string, double> wall_seconds;
};

// Everything the protocol needs besides the config itself.
struct World {
  EmbeddingTable table;
  std::vector<std::string> bank_text;
  std::vector<TokenSequence> bank;
  TextEncoder encoder;
  SyntheticGenerator generator;
  LanguagePrior prior;
};

inline World build_world(const ExperimentConfig& cfg) {
  EmbeddingTable table = cfg.table_path.empty()
                             ? make_world_table({.embedding_dim = cfg.embedding_dim, .seed = cfg.world_seed})
                             : load_embedding_table(cfg.table_path);
  std::vector<std::string> bank_text = cfg.prompt_bank_path.empty()
                                           ? make_world_prompts(static_cast<std::size_t>(cfg.bank_size), cfg.world_seed)
                                           : read_lines(cfg.prompt_bank_path);
  std::vector<TokenSequence> bank;
  bank.reserve(bank_text.size());
  for (const auto& line : bank_text) bank.push_back(tokenize(line, table));

  auto prior = LanguagePrior::uniform(table.size());
  if (cfg.prior == "bigram") {
    // Held-out synthetic corpus: same generator, different seed, minus any
    // line that also appears in the bank.
    const std::set<std::string> in_bank(bank_text.begin(), bank_text.end());
    std::vector<TokenSequence> corpus;
    for (const auto& line : make_world_prompts(static_cast<std::size_t>(cfg.bank_size), cfg.world_seed + 1)) {
      if (!in_bank.contains(line)) corpus.push_back(tokenize(line, table));
    }
    prior = LanguagePrior::bigram(train_bigram(corpus, table.size(), cfg.prior_alpha));
  } else if (cfg.prior.starts_with("bigram:")) {
    const auto corpus = load_corpus(cfg.prior.substr(7), table);
    prior = LanguagePrior::bigram(train_bigram(corpus, table.size(), cfg.prior_alpha));
  }

  auto encoder = TextEncoder::random(table.dim(), cfg.latent_dim, cfg.encoder_seed);
  auto generator = build_generator(cfg.latent_dim, cfg.feature_dim, cfg.sigma, cfg.generator_seed);
  return World{std::move(table), std::move(bank_text), std::move(bank), std::move(encoder), std::move(generator),
               std::move(prior)};
}

// Seeded choice of `count` distinct bank indices, in draw order.
inline std::vector<std::size_t> sample_prompt_indices(std::size_t bank_size, std::size_t count, std::uint64_t master_seed) {
  if (bank_size < count) {
    throw ValidationError("prompt bank has " + std::to_string(bank_size) + " prompts, need " + std::to_string(count));
  }
  std::vector<std::size_t> idx(bank_size);
  for (std::size_t i = 0; i < bank_size; ++i) idx[i] = i;
  Rng rng(derive_seed(master_seed, {0x5a3b1e}));
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(bank_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

namespace detail {

enum class Purpose : std::uint64_t { kReference = 1, kRegen = 2, kOptimizer = 3 };

inline std::uint64_t method_tag(std::string_view method) {
  if (method == kMethodPez) return 1;
  if (method == kMethodGcg) return 2;
  if (method == kMethodRandomSearch) return 3;
  if (method == kMethodAutoDan) return 4;
  return 5;
}

inline std::vector<std::pair<int, double>> losses_of(const OptimRun& run) {
  std::vector<std::pair<int, double>> out;
  out.reserve(run.trajectory.size());
  for (const auto& p : run.trajectory) out.emplace_back(p.step, p.loss);
  return out;
}

// FID of singleton sets uses the zero-covariance Gaussian fit.
inline double protocol_fid(const FeatureSet& a, const FeatureSet& b) {
  if (a.rows() >= 2 && b.rows() >= 2) return fid(a, b);
  return (a.colwise().mean() - b.colwise().mean()).squaredNorm();
}

inline double protocol_kid(const FeatureSet& a, const FeatureSet& b) {
  if (a.rows() >= 2 && b.rows() >= 2) return kid(a, b);
  return std::numeric_limits<double>::quiet_NaN();
}

struct PromptResult {
  std::vector<MetricRow> rows;
  std::vector<RunRecord> runs;
  std::map<std::string, double> seconds;
};

inline std::vector<std::string> enabled_methods(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  if (cfg.pez_enabled) out.emplace_back(kMethodPez);
  if (cfg.gcg_enabled) out.emplace_back(kMethodGcg);
  if (cfg.random_search_enabled) out.emplace_back(kMethodRandomSearch);
  if (cfg.autodan_enabled) out.emplace_back(kMethodAutoDan);
  if (cfg.caption_enabled) out.emplace_back(kMethodCaption);
  return out;
}

inline PromptResult run_prompt(const ExperimentConfig& cfg, const World& world, std::size_t prompt_index,
                               std::size_t bank_index, std::span<const TokenSequence> caption_bank) {
  PromptResult result;
  const TokenSequence& original = world.bank[bank_index];
  const auto refs_count = static_cast<std::size_t>(cfg.n_reference);
  const auto regen_count = static_cast<std::size_t>(cfg.n_regen);
  const auto p = static_cast<std::uint64_t>(prompt_index);
  const auto purpose = [](Purpose x) { return static_cast<std::uint64_t>(x); };

  FeatureSet references(static_cast<Eigen::Index>(refs_count), world.generator.feature_dim());
  std::vector<TargetLatent> targets;
  for (std::size_t r = 0; r < refs_count; ++r) {
    Rng rng(derive_seed(cfg.master_seed, {p, r, purpose(Purpose::kReference)}));
    references.row(static_cast<Eigen::Index>(r)) = generate(world.generator, original, world.encoder, world.table, rng);
    targets.push_back(image_encode(world.generator, references.row(static_cast<Eigen::Index>(r)).transpose()));
  }
  const TokenSequence prefix = cfg.autodan_prefix.empty() ? TokenSequence{} : tokenize(cfg.autodan_prefix, world.table);

  for (const auto& method : enabled_methods(cfg)) {
    const auto started = std::chrono::steady_clock::now();
    MetricRow row;
    row.method = method;
    row.prompt_id = static_cast<int>(bank_index);
    const std::size_t first_run = result.runs.size();
    try {
      std::vector<TokenSequence> inverted;
      for (std::size_t r = 0; r < refs_count; ++r) {
        const ClipObjective objective(world.table, world.encoder, targets[r]);
        const auto seed = derive_seed(cfg.master_seed, {p, r, purpose(Purpose::kOptimizer), method_tag(method)});
        RunRecord rec;
        rec.method = method;
        rec.prompt_id = row.prompt_id;
        rec.ref_id = static_cast<int>(r);
        OptimRun run;
        if (method == kMethodPez) {
          PezConfig c = cfg.pez;
          c.prompt_length = cfg.prompt_length;
          c.seed = seed;
          run = pez_invert(objective, world.table, c);
        } else if (method == kMethodGcg) {
          GcgConfig c = cfg.gcg;
          c.prompt_length = cfg.prompt_length;
          c.seed = seed;
          run = gcg_invert(objective, world.table, c);
        } else if (method == kMethodRandomSearch) {
          RsConfig c = cfg.random_search;
          c.prompt_length = cfg.prompt_length;
          c.seed = seed;
          run = random_search_invert(objective, world.table, c);
        } else if (method == kMethodAutoDan) {
          AutoDanConfig c = cfg.autodan;
          c.prefix = prefix;
          c.seed = seed;
          run = autodan_invert(objective, world.table, world.prior, c);
        } else {
          const TokenSequence caption = retrieval_caption(caption_bank, objective);
          run.method = method;
          run.evaluations = caption_bank.size();
          run.record(0, objective.loss(caption), caption, {});
        }
        rec.best_loss = run.best_loss;
        rec.best_sequence = run.best_sequence;
        rec.best_text = detokenize(run.best_sequence, world.table);
        rec.evaluations = run.evaluations;
        rec.trajectory = losses_of(run);
        inverted.push_back(run.best_sequence);
        result.runs.push_back(std::move(rec));
      }

      FeatureSet regenerated(static_cast<Eigen::Index>(refs_count * regen_count), world.generator.feature_dim());
      double clip_sum = 0.0;
      double text_sum = 0.0;
      for (std::size_t r = 0; r < refs_count; ++r) {
        for (std::size_t g = 0; g < regen_count; ++g) {
          Rng rng(derive_seed(cfg.master_seed, {p, r, purpose(Purpose::kRegen), g}));
          regenerated.row(static_cast<Eigen::Index>(r * regen_count + g)) =
              generate(world.generator, inverted[r], world.encoder, world.table, rng);
        }
        clip_sum += clip_score(inverted[r], references.row(static_cast<Eigen::Index>(r)).transpose(), world.encoder,
                               world.generator, world.table);
        text_sum += text_similarity(inverted[r], original, world.encoder, world.table);
      }
      row.metrics.fid = protocol_fid(references, regenerated);
      row.metrics.kid = protocol_kid(references, regenerated);
      row.metrics.clip_score = clip_sum / static_cast<double>(refs_count);
      row.metrics.text_similarity = text_sum / static_cast<double>(refs_count);
      row.metrics.n_reference = refs_count;
      row.metrics.n_generated = refs_count * regen_count;
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.metrics = {nan, nan, nan, nan, refs_count, refs_count * regen_count};
      row.error = e.what();
      // Runs that completed before the failure stay; the failing one is
      // recorded explicitly.
      RunRecord failed;
      failed.method = method;
      failed.prompt_id = row.prompt_id;
      failed.ref_id = static_cast<int>(result.runs.size() - first_run);
      failed.error = e.what();
      result.runs.push_back(std::move(failed));
    }
    result.rows.push_back(std::move(row));
    result.seconds[method] += std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return result;
}

}  // namespace detail

// Runs the full protocol. Config errors abort before any work; failures of
// individual (method, prompt) units become error rows.
inline BenchmarkReport run_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  const World world = build_world(cfg);
  const auto sampled = sample_prompt_indices(world.bank.size(), static_cast<std::size_t>(cfg.n_prompts), cfg.master_seed);

  // The captioner never sees the evaluation prompts (or exact duplicates).
  std::set<std::string> held_out;
  for (auto i : sampled) held_out.insert(detokenize(world.bank[i], world.table));
  std::vector<TokenSequence> caption_bank;
  for (const auto& seq : world.bank) {
    if (!held_out.contains(detokenize(seq, world.table))) caption_bank.push_back(seq);
  }
  if (cfg.caption_enabled && caption_bank.empty()) {
    throw ValidationError("caption baseline needs bank prompts beyond the evaluation sample");
  }

  std::vector<detail::PromptResult> results(sampled.size());
  const std::size_t workers =
      std::max<std::size_t>(1, cfg.threads == 0 ? std::thread::hardware_concurrency() : static_cast<std::size_t>(cfg.threads));
  if (workers == 1 || sampled.size() == 1) {
    for (std::size_t i = 0; i < sampled.size(); ++i) results[i] = detail::run_prompt(cfg, world, i, sampled[i], caption_bank);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, sampled.size()); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < sampled.size(); i = next++) {
          try {
            results[i] = detail::run_prompt(cfg, world, i, sampled[i], caption_bank);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  BenchmarkReport report;
  report.config = cfg;
  for (auto& r : results) {
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
    for (auto& run : r.runs) report.runs.push_back(std::move(run));
    for (const auto& [m, s] : r.seconds) report.wall_seconds[m] += s;
  }
  return report;
}

}  // namespace promptinv::harness
