#pragma once

// Results directory layout:
//   runs.jsonl     one JSON record per optimizer run
//   metrics.csv    one row per (method, prompt)
//   summary.csv    per-method aggregates
//   manifest.json  schema version, config snapshot, completion marker;
//                  written last, so its absence marks a partial directory

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "promptinv/error.hpp"
#include "promptinv/harness/benchmark.hpp"
#include "promptinv/harness/summary.hpp"

namespace promptinv::harness {

inline constexpr int kResultsSchemaVersion = 1;
inline constexpr const char* kRunsFile = "runs.jsonl";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kManifestFile = "manifest.json";

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

inline double parse_csv_number(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  return parse_number<double>("csv", field);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// RFC 4180-style records; quoted fields may span lines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (quoted) throw FormatError("csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline std::string format_run_record(const RunRecord& run) {
  nlohmann::ordered_json j;
  j["method"] = run.method;
  j["prompt_id"] = run.prompt_id;
  j["ref_id"] = run.ref_id;
  j["best_loss"] = detail::number_or_null(run.best_loss);
  j["best_sequence"] = run.best_sequence;
  j["best_text"] = run.best_text;
  j["evaluations"] = run.evaluations;
  auto traj = nlohmann::ordered_json::array();
  for (const auto& [step, loss] : run.trajectory) {
    traj.push_back(nlohmann::ordered_json::array({step, detail::number_or_null(loss)}));
  }
  j["trajectory"] = std::move(traj);
  j["error"] = run.error.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(run.error);
  return j.dump();
}

inline RunRecord parse_run_record(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    RunRecord run;
    run.method = j.at("method").get<std::string>();
    run.prompt_id = j.at("prompt_id").get<int>();
    run.ref_id = j.at("ref_id").get<int>();
    run.best_loss = detail::number_from(j.at("best_loss"));
    run.best_sequence = j.at("best_sequence").get<TokenSequence>();
    run.best_text = j.at("best_text").get<std::string>();
    run.evaluations = j.at("evaluations").get<std::uint64_t>();
    for (const auto& point : j.at("trajectory")) {
      run.trajectory.emplace_back(point.at(0).get<int>(), detail::number_from(point.at(1)));
    }
    if (!j.at("error").is_null()) run.error = j.at("error").get<std::string>();
    return run;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("runs.jsonl: ") + e.what());
  }
}

inline std::string format_runs(const std::vector<RunRecord>& runs) {
  std::string out;
  for (const auto& r : runs) {
    out += format_run_record(r);
    out += '\n';
  }
  return out;
}

inline std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "method,prompt_id,fid,kid,clip_score,text_similarity,n_reference,n_generated,error\n";
  for (const auto& r : rows) {
    out << detail::csv_field(r.method) << ',' << r.prompt_id << ',' << detail::csv_number(r.metrics.fid) << ','
        << detail::csv_number(r.metrics.kid) << ',' << detail::csv_number(r.metrics.clip_score) << ','
        << detail::csv_number(r.metrics.text_similarity) << ',' << r.metrics.n_reference << ','
        << r.metrics.n_generated << ',' << detail::csv_field(r.error) << '\n';
  }
  return out.str();
}

inline std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  const auto records = detail::parse_csv(text);
  if (records.empty() || records.front().size() != 9 || records.front()[0] != "method") {
    throw FormatError("metrics.csv: missing or malformed header");
  }
  std::vector<MetricRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != 9) throw FormatError("metrics.csv: row " + std::to_string(i) + " has " + std::to_string(f.size()) + " fields");
    MetricRow row;
    row.method = f[0];
    row.prompt_id = detail::parse_number<int>("prompt_id", f[1]);
    row.metrics.fid = detail::parse_csv_number(f[2]);
    row.metrics.kid = detail::parse_csv_number(f[3]);
    row.metrics.clip_score = detail::parse_csv_number(f[4]);
    row.metrics.text_similarity = detail::parse_csv_number(f[5]);
    row.metrics.n_reference = detail::parse_number<std::size_t>("n_reference", f[6]);
    row.metrics.n_generated = detail::parse_number<std::size_t>("n_generated", f[7]);
    row.error = f[8];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "method,metric,n,mean,sd,ci_low,ci_high\n";
  for (const auto& r : rows) {
    out << detail::csv_field(r.method) << ',' << detail::csv_field(r.metric) << ',' << r.n << ','
        << detail::csv_number(r.mean) << ',' << detail::csv_number(r.sd) << ',' << detail::csv_number(r.ci_low) << ','
        << detail::csv_number(r.ci_high) << '\n';
  }
  return out.str();
}

inline void write_results(const BenchmarkReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  fs::remove(root / kManifestFile);

  write_file_bytes((root / kRunsFile).string(), format_runs(report.runs));
  write_file_bytes((root / kMetricsFile).string(), format_metrics_csv(report.rows));
  write_file_bytes((root / kSummaryFile).string(), format_summary_csv(summarize(report)));

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = kResultsSchemaVersion;
  nlohmann::ordered_json config;
  for (const auto& [key, value] : config_entries(report.config)) config[key] = value;
  manifest["config"] = std::move(config);
  manifest["files"] = {kRunsFile, kMetricsFile, kSummaryFile};
  manifest["wall_seconds"] = report.wall_seconds;
  manifest["complete"] = true;
  write_file_bytes((root / kManifestFile).string(), manifest.dump(2) + "\n");
}

inline BenchmarkReport read_results(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::exists(root / kManifestFile)) {
    throw FormatError("partial results in " + dir + ": manifest.json missing");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file_bytes((root / kManifestFile).string()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  if (!manifest.contains("schema_version") || !manifest["schema_version"].is_number_integer()) {
    throw FormatError("manifest.json: missing schema_version");
  }
  const int version = manifest["schema_version"].get<int>();
  if (version != kResultsSchemaVersion) {
    throw FormatError("results schema version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kResultsSchemaVersion) + ")");
  }
  if (!manifest.value("complete", false)) throw FormatError("partial results in " + dir + ": manifest not complete");

  BenchmarkReport report;
  for (const auto& [key, value] : manifest.at("config").items()) set_config_value(report.config, key, value.get<std::string>());
  if (manifest.contains("wall_seconds")) {
    for (const auto& [key, value] : manifest["wall_seconds"].items()) report.wall_seconds[key] = value.get<double>();
  }

  std::istringstream runs(read_file_bytes((root / kRunsFile).string()));
  std::string line;
  while (std::getline(runs, line)) {
    if (!line.empty()) report.runs.push_back(parse_run_record(line));
  }
  report.rows = parse_metrics_csv(read_file_bytes((root / kMetricsFile).string()));
  return report;
}

}  // namespace promptinv::harness
