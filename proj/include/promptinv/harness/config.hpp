#pragma once

// Benchmark configuration: the record itself, named presets, a flat field
// registry ("section.key") used for config files, CLI overrides and the
// snapshot stored next to results.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "promptinv/error.hpp"
#include "promptinv/optimizers.hpp"

namespace promptinv::harness {

struct ExperimentConfig {
  // Empty paths select the bundled synthetic world.
  std::string table_path;
  std::string prompt_bank_path;
  std::string output_dir = "results";

  int n_prompts = 25;
  int n_reference = 4;
  int n_regen = 2;

  int embedding_dim = 32;  // synthetic world only
  std::uint64_t world_seed = 2024;
  int bank_size = 600;  // synthetic bank only

  int latent_dim = 16;
  int feature_dim = 64;
  double sigma = 0.3;
  std::uint64_t encoder_seed = 7;
  std::uint64_t generator_seed = 11;
  std::uint64_t master_seed = 1;

  // Shared hard-prompt length of the fixed-length methods.
  int prompt_length = 8;
  int threads = 1;

  bool pez_enabled = true;
  bool gcg_enabled = true;
  bool random_search_enabled = true;
  bool autodan_enabled = true;
  bool caption_enabled = true;

  PezConfig pez{};
  GcgConfig gcg = [] {
    GcgConfig c;
    c.top_k = 32;
    return c;
  }();
  RsConfig random_search{};
  AutoDanConfig autodan = [] {
    AutoDanConfig c;
    c.max_tokens = 8;
    return c;
  }();
  // "uniform", "bigram" (synthetic corpus) or "bigram:<path>".
  std::string prior = "uniform";
  double prior_alpha = 1.0;
  std::string autodan_prefix;

  [[nodiscard]] int enabled_method_count() const {
    return int{pez_enabled} + int{gcg_enabled} + int{random_search_enabled} + int{autodan_enabled} +
           int{caption_enabled};
  }

  void validate() const {
    if (n_prompts < 1 || n_reference < 1 || n_regen < 1) {
      throw ValidationError("config: n_prompts, n_reference and n_regen must be >= 1");
    }
    if (enabled_method_count() == 0) throw ValidationError("config: no method enabled");
    if (latent_dim < 1 || feature_dim < latent_dim) throw ValidationError("config: need feature_dim >= latent_dim >= 1");
    if (table_path.empty() && embedding_dim < latent_dim) {
      throw ValidationError("config: embedding_dim must be >= latent_dim");
    }
    if (!(sigma >= 0.0)) throw ValidationError("config: sigma must be >= 0");
    if (prompt_length < 1) throw ValidationError("config: prompt_length must be >= 1");
    if (bank_size < 1) throw ValidationError("config: bank_size must be >= 1");
    if (threads < 0) throw ValidationError("config: threads must be >= 0");
    if (!(prior_alpha > 0.0)) throw ValidationError("config: prior_alpha must be > 0");
    if (prior != "uniform" && prior != "bigram" && !prior.starts_with("bigram:")) {
      throw ValidationError("config: prior must be uniform, bigram or bigram:<path>");
    }
    pez.validate();
    gcg.validate();
    random_search.validate();
    autodan.validate();
  }
};

// Preset names: "desk" (defaults), "paper-scale" (250 prompts, 10
// references, 16-token prompts) and "paper-5.1" (desk with 4 beams of 128).
inline ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig cfg;
  if (name == "desk" || name.empty()) return cfg;
  if (name == "paper-scale") {
    cfg.n_prompts = 250;
    cfg.n_reference = 10;
    cfg.n_regen = 2;
    cfg.prompt_length = 16;
    cfg.gcg.top_k = 64;
    cfg.autodan.max_tokens = 16;
    return cfg;
  }
  if (name == "paper-5.1") {
    const auto preset = AutoDanConfig::four_beam_preset();
    cfg.autodan.beam_width = preset.beam_width;
    cfg.autodan.top_k = preset.top_k;
    return cfg;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "'");
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw RuntimeFailure("format_double failed");
  return {buf, ptr};
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ValidationError("config: bad value '" + text + "' for " + key);
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("config: bad boolean '" + text + "' for " + key);
}

}  // namespace detail

struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Every configurable field, in snapshot order.
inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> kFields = [] {
    std::vector<ConfigField> f;
    auto add_string = [&f](std::string key, std::string help, std::string ExperimentConfig::*member) {
      f.push_back({key, std::move(help), [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
                   [member](const ExperimentConfig& c) { return c.*member; }});
    };
    auto add_int = [&f](std::string key, std::string help, auto getter) {
      f.push_back({key, std::move(help),
                   [getter, key](ExperimentConfig& c, const std::string& v) {
                     getter(c) = detail::parse_number<std::remove_reference_t<decltype(getter(c))>>(key, v);
                   },
                   [getter](const ExperimentConfig& c) {
                     auto copy = c;
                     return std::to_string(getter(copy));
                   }});
    };
    auto add_double = [&f](std::string key, std::string help, auto getter) {
      f.push_back({key, std::move(help),
                   [getter, key](ExperimentConfig& c, const std::string& v) { getter(c) = detail::parse_number<double>(key, v); },
                   [getter](const ExperimentConfig& c) {
                     auto copy = c;
                     return detail::format_double(getter(copy));
                   }});
    };
    auto add_bool = [&f](std::string key, std::string help, auto getter) {
      f.push_back({key, std::move(help),
                   [getter, key](ExperimentConfig& c, const std::string& v) { getter(c) = detail::parse_bool(key, v); },
                   [getter](const ExperimentConfig& c) {
                     auto copy = c;
                     return std::string(getter(copy) ? "true" : "false");
                   }});
    };
    using C = ExperimentConfig;
    add_string("table", "EMBT table path (empty: synthetic world)", &C::table_path);
    add_string("prompt_bank", "prompt bank path, one prompt per line (empty: synthetic bank)", &C::prompt_bank_path);
    add_string("output_dir", "results directory", &C::output_dir);
    add_int("n_prompts", "prompts sampled from the bank", [](C& c) -> int& { return c.n_prompts; });
    add_int("n_reference", "reference features per prompt", [](C& c) -> int& { return c.n_reference; });
    add_int("n_regen", "regenerated features per inverted prompt", [](C& c) -> int& { return c.n_regen; });
    add_int("embedding_dim", "synthetic table dimension", [](C& c) -> int& { return c.embedding_dim; });
    add_int("world_seed", "synthetic world seed", [](C& c) -> std::uint64_t& { return c.world_seed; });
    add_int("bank_size", "synthetic prompt bank size", [](C& c) -> int& { return c.bank_size; });
    add_int("latent_dim", "text/image latent dimension m", [](C& c) -> int& { return c.latent_dim; });
    add_int("feature_dim", "generator feature dimension m'", [](C& c) -> int& { return c.feature_dim; });
    add_double("sigma", "generator noise sigma", [](C& c) -> double& { return c.sigma; });
    add_int("encoder_seed", "text encoder seed", [](C& c) -> std::uint64_t& { return c.encoder_seed; });
    add_int("generator_seed", "generator lift seed", [](C& c) -> std::uint64_t& { return c.generator_seed; });
    add_int("master_seed", "master seed for sampling, noise and optimizer seeds",
            [](C& c) -> std::uint64_t& { return c.master_seed; });
    add_int("prompt_length", "hard prompt length for pez/gcg/random_search", [](C& c) -> int& { return c.prompt_length; });
    add_int("threads", "worker threads (0: hardware concurrency)", [](C& c) -> int& { return c.threads; });

    add_bool("pez.enabled", "run PEZ", [](C& c) -> bool& { return c.pez_enabled; });
    add_int("pez.steps", "PEZ steps", [](C& c) -> int& { return c.pez.steps; });
    add_double("pez.learning_rate", "PEZ Adam learning rate", [](C& c) -> double& { return c.pez.learning_rate; });
    add_double("pez.weight_decay", "PEZ decoupled weight decay", [](C& c) -> double& { return c.pez.weight_decay; });

    add_bool("gcg.enabled", "run GCG", [](C& c) -> bool& { return c.gcg_enabled; });
    add_int("gcg.steps", "GCG steps", [](C& c) -> int& { return c.gcg.steps; });
    add_int("gcg.top_k", "GCG per-position candidate pool", [](C& c) -> int& { return c.gcg.top_k; });
    add_int("gcg.batch_size", "GCG candidates per step", [](C& c) -> int& { return c.gcg.batch_size; });

    add_bool("random_search.enabled", "run random search", [](C& c) -> bool& { return c.random_search_enabled; });
    add_int("random_search.steps", "random search steps", [](C& c) -> int& { return c.random_search.steps; });
    add_int("random_search.batch_size", "random search candidates per step",
            [](C& c) -> int& { return c.random_search.batch_size; });

    add_bool("autodan.enabled", "run AutoDAN", [](C& c) -> bool& { return c.autodan_enabled; });
    add_int("autodan.max_tokens", "AutoDAN tokens appended", [](C& c) -> int& { return c.autodan.max_tokens; });
    add_int("autodan.top_k", "AutoDAN fine-search size", [](C& c) -> int& { return c.autodan.top_k; });
    add_int("autodan.beam_width", "AutoDAN beam width", [](C& c) -> int& { return c.autodan.beam_width; });
    add_double("autodan.prior_weight", "AutoDAN log-prior weight", [](C& c) -> double& { return c.autodan.prior_weight; });
    add_string("autodan.prior", "uniform | bigram | bigram:<corpus path>", &C::prior);
    add_double("autodan.prior_alpha", "bigram Laplace smoothing", [](C& c) -> double& { return c.prior_alpha; });
    add_string("autodan.prefix", "AutoDAN prefix text", &C::autodan_prefix);

    add_bool("caption.enabled", "run the retrieval captioner baseline", [](C& c) -> bool& { return c.caption_enabled; });
    return f;
  }();
  return kFields;
}

inline const ConfigField& find_config_field(std::string_view key) {
  for (const auto& f : config_fields()) {
    if (f.key == key) return f;
  }
  throw ValidationError("config: unknown key '" + std::string(key) + "'");
}

inline void set_config_value(ExperimentConfig& cfg, std::string_view key, const std::string& value) {
  find_config_field(key).set(cfg, value);
}

// Flat key -> value view of a config, in registry order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : config_fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

// Parses `key = value` lines with optional [section] headers. A top-level
// `preset` key selects the starting point; every other key overrides it.
inline ExperimentConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  std::vector<std::pair<std::string, std::string>> entries;
  std::string preset;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name == "preset") {
        preset = node.data();
      } else {
        entries.emplace_back(name, node.data());
      }
    } else {
      for (const auto& [key, leaf] : node) entries.emplace_back(name + "." + key, leaf.data());
    }
  }
  ExperimentConfig cfg = preset_config(preset);
  for (const auto& [key, value] : entries) set_config_value(cfg, key, value);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  return parse_config(in);
}

inline std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : config_entries(cfg)) {
    const auto dot = key.find('.');
    const std::string this_section = dot == std::string::npos ? "" : key.substr(0, dot);
    if (this_section != section) {
      out << "\n[" << this_section << "]\n";
      section = this_section;
    }
    out << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = " << value << '\n';
  }
  return out.str();
}

// PROMPTINV_SEED, when set, replaces the master seed.
inline void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* seed = std::getenv("PROMPTINV_SEED"); seed != nullptr && *seed != '\0') {
    cfg.master_seed = detail::parse_number<std::uint64_t>("PROMPTINV_SEED", seed);
  }
}

}  // namespace promptinv::harness
