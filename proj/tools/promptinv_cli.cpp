// promptinv command-line interface.
//
// Exit codes: 0 success, 1 invalid input (arguments, config, files),
// 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "promptinv/promptinv.hpp"

namespace {

using namespace promptinv;
using namespace promptinv::harness;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// --config, --preset and one --<key> flag per registry field.
struct ConfigOptions {
  std::string config_path;
  std::string preset;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "preset: desk, paper-scale, paper-5.1");
    for (const auto& field : config_fields()) {
      app->add_option_function<std::string>(
          "--" + field.key, [this, key = field.key](const std::string& v) { overrides[key] = v; }, field.help);
    }
  }

  // Preset, then file, then PROMPTINV_SEED, then command-line flags.
  [[nodiscard]] ExperimentConfig resolve() const {
    ExperimentConfig cfg = config_path.empty() ? preset_config(preset) : load_config(config_path);
    if (!config_path.empty() && !preset.empty()) {
      throw ValidationError("--preset and --config are exclusive; put `preset = ...` in the file instead");
    }
    apply_env_overrides(cfg);
    for (const auto& field : config_fields()) {
      if (auto it = overrides.find(field.key); it != overrides.end()) field.set(cfg, it->second);
    }
    return cfg;
  }
};

std::string fmt(double v, int precision = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

void print_summary(const std::vector<SummaryRow>& rows) {
  std::cout << std::left << std::setw(15) << "method" << std::setw(18) << "metric" << std::right << std::setw(5) << "n"
            << std::setw(12) << "mean" << std::setw(12) << "sd" << std::setw(12) << "ci_low" << std::setw(12)
            << "ci_high" << '\n';
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(15) << r.method << std::setw(18) << r.metric << std::right << std::setw(5)
              << r.n << std::setw(12) << fmt(r.mean) << std::setw(12) << fmt(r.sd) << std::setw(12) << fmt(r.ci_low)
              << std::setw(12) << fmt(r.ci_high) << '\n';
  }
}

// Summary rows for the four metrics plus the final best-loss checkpoint.
std::vector<SummaryRow> headline_rows(const std::vector<SummaryRow>& rows) {
  std::map<std::string, std::string> last_checkpoint;
  for (const auto& r : rows) {
    if (r.metric.starts_with("best_loss@")) last_checkpoint[r.method] = r.metric;
  }
  std::vector<SummaryRow> out;
  for (const auto& r : rows) {
    if (!r.metric.starts_with("best_loss@") || last_checkpoint[r.method] == r.metric) out.push_back(r);
  }
  return out;
}

struct InvertOptions {
  ConfigOptions config;
  std::string method;
  std::string prompt;
  std::string features;
  int row = 0;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

int run_invert(const InvertOptions& opt) {
  ExperimentConfig cfg = opt.config.resolve();
  cfg.validate();
  const World world = build_world(cfg);

  if (opt.prompt.empty() == opt.features.empty()) throw ValidationError("invert: give exactly one of --prompt or --features");
  FeatureVector reference;
  std::string original_text;
  if (!opt.prompt.empty()) {
    const TokenSequence original = tokenize(opt.prompt, world.table);
    original_text = detokenize(original, world.table);
    Rng rng(derive_seed(cfg.master_seed, {0x1a7e}));
    reference = generate(world.generator, original, world.encoder, world.table, rng);
  } else {
    const LabeledBlock block = load_feature_set(opt.features);
    if (opt.row < 0 || opt.row >= block.values.rows()) {
      throw ValidationError("invert: --row " + std::to_string(opt.row) + " outside feature file with " +
                            std::to_string(block.values.rows()) + " rows");
    }
    reference = block.values.row(opt.row).transpose();
  }
  const ClipObjective objective(world.table, world.encoder, image_encode(world.generator, reference));
  const std::uint64_t seed = opt.seed.value_or(cfg.master_seed);

  OptimRun run;
  if (opt.method == kMethodPez) {
    PezConfig c = cfg.pez;
    c.prompt_length = cfg.prompt_length;
    c.seed = seed;
    if (opt.steps) c.steps = *opt.steps;
    run = pez_invert(objective, world.table, c);
  } else if (opt.method == kMethodGcg) {
    GcgConfig c = cfg.gcg;
    c.prompt_length = cfg.prompt_length;
    c.seed = seed;
    if (opt.steps) c.steps = *opt.steps;
    run = gcg_invert(objective, world.table, c);
  } else if (opt.method == kMethodRandomSearch) {
    RsConfig c = cfg.random_search;
    c.prompt_length = cfg.prompt_length;
    c.seed = seed;
    if (opt.steps) c.steps = *opt.steps;
    run = random_search_invert(objective, world.table, c);
  } else if (opt.method == kMethodAutoDan) {
    AutoDanConfig c = cfg.autodan;
    c.prefix = cfg.autodan_prefix.empty() ? TokenSequence{} : tokenize(cfg.autodan_prefix, world.table);
    c.seed = seed;
    if (opt.steps) c.max_tokens = *opt.steps;
    run = autodan_invert(objective, world.table, world.prior, c);
  } else {
    std::vector<TokenSequence> bank;
    for (const auto& seq : world.bank) {
      if (detokenize(seq, world.table) != original_text) bank.push_back(seq);
    }
    if (bank.empty()) throw ValidationError("invert: caption bank is empty");
    const TokenSequence caption = retrieval_caption(bank, objective);
    run.method = opt.method;
    run.evaluations = bank.size();
    run.record(0, objective.loss(caption), caption, {});
  }

  RunRecord rec;
  rec.method = opt.method;
  rec.best_loss = run.best_loss;
  rec.best_sequence = run.best_sequence;
  rec.best_text = detokenize(run.best_sequence, world.table);
  rec.evaluations = run.evaluations;
  for (const auto& p : run.trajectory) rec.trajectory.emplace_back(p.step, p.loss);
  if (opt.json) {
    std::cout << format_run_record(rec) << '\n';
    return 0;
  }
  std::cout << "method:      " << rec.method << '\n'
            << "best_loss:   " << harness::detail::format_double(rec.best_loss) << '\n'
            << "best_prompt: " << rec.best_text << '\n'
            << "steps:       " << (rec.trajectory.empty() ? 0 : rec.trajectory.back().first) << '\n'
            << "evaluations: " << rec.evaluations << '\n';
  if (!original_text.empty()) {
    std::cout << "original:    " << original_text << '\n'
              << "text_sim:    "
              << fmt(text_similarity(run.best_sequence, tokenize(original_text, world.table), world.encoder, world.table))
              << '\n';
  }
  return 0;
}

int run_benchmark_cmd(const ConfigOptions& options, bool quiet) {
  const ExperimentConfig cfg = options.resolve();
  const BenchmarkReport report = run_benchmark(cfg);
  write_results(report, cfg.output_dir);
  if (!quiet) print_summary(headline_rows(summarize(report)));
  std::size_t failures = 0;
  for (const auto& row : report.rows) failures += row.error.empty() ? 0 : 1;
  std::cout << "wrote " << report.rows.size() << " metric rows (" << failures << " failed) to " << cfg.output_dir << '\n';
  return 0;
}

int run_summarize(const std::string& dir, const SummaryOptions& sopt, bool write, bool all_checkpoints) {
  const BenchmarkReport report = read_results(dir);
  const auto rows = summarize(report, sopt);
  if (write) write_file_bytes((std::filesystem::path(dir) / kSummaryFile).string(), format_summary_csv(rows));
  print_summary(all_checkpoints ? rows : headline_rows(rows));
  return 0;
}

int run_gradcheck_cmd(const GradcheckOptions& opt) {
  const auto result = run_gradcheck(opt);
  for (std::size_t i = 0; i < result.cases.size(); ++i) {
    const auto& c = result.cases[i];
    std::cout << "instance " << std::setw(3) << i << "  d=" << std::setw(2) << c.dim << " m=" << std::setw(2)
              << c.latent_dim << " s=" << c.length << "  embeddings " << std::scientific << std::setprecision(2)
              << c.embedding_error << "  onehot " << c.onehot_error << std::defaultfloat << '\n';
  }
  std::cout << (result.passed ? "PASS" : "FAIL") << "  max relative error " << std::scientific << std::setprecision(3)
            << std::max(result.max_embedding_error, result.max_onehot_error) << " (tolerance " << opt.tolerance << ")\n";
  if (!result.passed) throw RuntimeFailure("gradcheck: analytic and numeric gradients disagree");
  return 0;
}

int run_metrics_cmd(const std::string& path_a, const std::string& path_b, bool json) {
  const auto a = load_feature_set(path_a).values;
  const auto b = load_feature_set(path_b).values;
  const double f = fid(a, b);
  const double k = kid(a, b);
  if (json) {
    nlohmann::ordered_json j;
    j["fid"] = f;
    j["kid"] = k;
    j["n_a"] = a.rows();
    j["n_b"] = b.rows();
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "fid " << harness::detail::format_double(f) << "\nkid " << harness::detail::format_double(k) << "\nn_a " << a.rows()
              << "\nn_b " << b.rows() << '\n';
  }
  return 0;
}

// Bundled synthetic fixtures: the desk table, a prompt bank, a held-out
// corpus, two small feature sets and deliberately broken inputs.
int run_make_fixtures(const std::string& out_dir, std::uint64_t world_seed, int embedding_dim) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  ExperimentConfig cfg;
  cfg.world_seed = world_seed;
  cfg.embedding_dim = embedding_dim;
  cfg.validate();
  const World world = build_world(cfg);
  save_embedding_table(world.table, (root / "desk.embt").string());
  write_lines((root / "prompts.txt").string(), world.bank_text);

  const std::set<std::string> in_bank(world.bank_text.begin(), world.bank_text.end());
  std::vector<std::string> corpus;
  for (auto& line : make_world_prompts(static_cast<std::size_t>(cfg.bank_size), world_seed + 1)) {
    if (!in_bank.contains(line)) corpus.push_back(std::move(line));
  }
  write_lines((root / "corpus.txt").string(), corpus);

  auto features_of = [&](std::size_t first, std::uint64_t stream) {
    FeatureSet set(20, world.generator.feature_dim());
    Rng rng(derive_seed(world_seed, {stream}));
    for (Eigen::Index i = 0; i < set.rows(); ++i) {
      set.row(i) = generate(world.generator, world.bank[first + static_cast<std::size_t>(i) % 5], world.encoder,
                            world.table, rng);
    }
    return set;
  };
  save_feature_set(features_of(0, 1), (root / "a.feat").string());
  save_feature_set(features_of(5, 2), (root / "b.feat").string());

  RowMatrix degenerate(3, 2);
  degenerate << 0.5, -0.25, 0.0, 0.0, 1.0, 1.0;
  save_embedding_table(EmbeddingTable({std::string(kUnkToken), "void", "ray"}, degenerate),
                       (root / "degenerate.embt").string());
  std::string truncated = encode_feature_set(features_of(0, 3));
  truncated.resize(truncated.size() - 4);
  write_file_bytes((root / "truncated.feat").string(), truncated);
  std::cout << "fixtures written to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptinv: discrete prompt inversion on a synthetic text-to-feature world"};
  app.require_subcommand(1);
  std::function<int()> action;

  InvertOptions invert;
  auto* invert_cmd = app.add_subcommand("invert", "invert a single target and print the best prompt");
  invert.config.attach(invert_cmd);
  invert_cmd->add_option("--method", invert.method, "pez, gcg, random_search, autodan or caption")
      ->required()
      ->check(CLI::IsMember({"pez", "gcg", "random_search", "autodan", "caption"}));
  invert_cmd->add_option("--prompt", invert.prompt, "prompt whose generated feature is the target");
  invert_cmd->add_option("--features", invert.features, "FEAT1 file holding the target feature");
  invert_cmd->add_option("--row", invert.row, "row of --features to invert");
  invert_cmd->add_option("--steps", invert.steps, "step budget (AutoDAN: tokens appended)");
  invert_cmd->add_option("--seed", invert.seed, "optimizer seed (default: master seed)");
  invert_cmd->add_flag("--json", invert.json, "print the run as a JSON record");
  invert_cmd->callback([&] { action = [&] { return run_invert(invert); }; });

  ConfigOptions bench;
  bool quiet = false;
  auto* bench_cmd = app.add_subcommand("benchmark", "run the full inversion benchmark");
  bench.attach(bench_cmd);
  bench_cmd->add_flag("--quiet", quiet, "skip the summary table");
  bench_cmd->callback([&] { action = [&] { return run_benchmark_cmd(bench, quiet); }; });

  std::string summary_dir;
  SummaryOptions sopt;
  bool no_write = false;
  bool all_checkpoints = false;
  auto* sum_cmd = app.add_subcommand("summarize", "recompute aggregates from a results directory");
  sum_cmd->add_option("dir", summary_dir, "results directory")->required();
  sum_cmd->add_option("--resamples", sopt.resamples, "bootstrap resamples")->check(CLI::PositiveNumber);
  sum_cmd->add_option("--seed", sopt.seed, "bootstrap seed (default: the run's master seed)");
  sum_cmd->add_flag("--no-write", no_write, "do not rewrite summary.csv");
  sum_cmd->add_flag("--checkpoints", all_checkpoints, "print every trajectory checkpoint");
  sum_cmd->callback([&] { action = [&] { return run_summarize(summary_dir, sopt, !no_write, all_checkpoints); }; });

  GradcheckOptions gopt;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the objective gradients");
  grad_cmd->add_option("--instances", gopt.instances, "random instances")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--seed", gopt.seed, "instance seed");
  grad_cmd->add_option("--step", gopt.step, "central difference step");
  grad_cmd->add_option("--tolerance", gopt.tolerance, "maximum relative error");
  grad_cmd->callback([&] { action = [&] { return run_gradcheck_cmd(gopt); }; });

  std::string feat_a;
  std::string feat_b;
  bool metrics_json = false;
  auto* metrics_cmd = app.add_subcommand("metrics", "FID and KID between two FEAT1 files");
  metrics_cmd->add_option("a", feat_a, "first feature set")->required();
  metrics_cmd->add_option("b", feat_b, "second feature set")->required();
  metrics_cmd->add_flag("--json", metrics_json, "print JSON");
  metrics_cmd->callback([&] { action = [&] { return run_metrics_cmd(feat_a, feat_b, metrics_json); }; });

  std::string fixtures_dir = "data";
  std::uint64_t fixtures_seed = ExperimentConfig{}.world_seed;
  int fixtures_dim = ExperimentConfig{}.embedding_dim;
  auto* fix_cmd = app.add_subcommand("make-fixtures", "write the bundled synthetic table, bank and feature files");
  fix_cmd->add_option("--out", fixtures_dir, "output directory");
  fix_cmd->add_option("--world_seed", fixtures_seed, "synthetic world seed");
  fix_cmd->add_option("--embedding_dim", fixtures_dim, "table dimension");
  fix_cmd->callback([&] { action = [&] { return run_make_fixtures(fixtures_dir, fixtures_seed, fixtures_dim); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    return action();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
}
