#pragma once

// Per-method aggregates: mean, standard deviation and a seeded percentile
// bootstrap interval for every metric, plus mean best-so-far loss at
// log-spaced trajectory checkpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "promptinv/harness/benchmark.hpp"
#include "promptinv/rng.hpp"

namespace promptinv::harness {

struct SummaryRow {
  std::string method;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SummaryOptions {
  int resamples = 1000;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Linear-interpolated quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline SummaryRow describe(std::string method, std::string metric, const std::vector<double>& values,
                           const SummaryOptions& opt) {
  SummaryRow row{std::move(method), std::move(metric), values.size(), 0.0, 0.0, 0.0, 0.0};
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean = row.sd = row.ci_low = row.ci_high = nan;
    return row;
  }
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  row.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - row.mean) * (v - row.mean);
  row.sd = values.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;

  Rng rng(derive_seed(opt.seed, {fnv1a(row.method), fnv1a(row.metric)}));
  std::vector<double> means(static_cast<std::size_t>(opt.resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[rng.uniform_index(values.size())];
    m = s / n;
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - opt.confidence) / 2.0;
  row.ci_low = quantile_sorted(means, tail);
  row.ci_high = quantile_sorted(means, 1.0 - tail);
  if (values.size() == 1) row.ci_low = row.ci_high = row.mean;
  return row;
}

}  // namespace detail

// 0, 1, 2, 5, 10, 20, 50, ... up to and including `max_step`.
inline std::vector<int> log_checkpoints(int max_step) {
  std::vector<int> out{0};
  for (long long decade = 1; decade <= max_step; decade *= 10) {
    for (long long mult : {1, 2, 5}) {
      if (decade * mult <= max_step) out.push_back(static_cast<int>(decade * mult));
    }
  }
  if (out.back() != max_step) out.push_back(max_step);
  return out;
}

inline std::vector<SummaryRow> summarize(const BenchmarkReport& report, SummaryOptions opt = {}) {
  if (opt.seed == 0) opt.seed = report.config.master_seed;
  std::vector<std::string> methods;
  for (const auto& row : report.rows) {
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
  }

  std::vector<SummaryRow> out;
  for (const auto& method : methods) {
    std::map<std::string, std::vector<double>> values;
    for (const auto& row : report.rows) {
      if (row.method != method || !row.error.empty()) continue;
      const std::pair<const char*, double> metrics[] = {{"fid", row.metrics.fid},
                                                        {"kid", row.metrics.kid},
                                                        {"clip_score", row.metrics.clip_score},
                                                        {"text_similarity", row.metrics.text_similarity}};
      for (const auto& [name, v] : metrics) {
        if (std::isfinite(v)) values[name].push_back(v);
      }
    }
    for (const char* name : {"fid", "kid", "clip_score", "text_similarity"}) {
      out.push_back(detail::describe(method, name, values[name], opt));
    }

    int max_step = 0;
    for (const auto& run : report.runs) {
      if (run.method == method && run.error.empty() && !run.trajectory.empty()) {
        max_step = std::max(max_step, run.trajectory.back().first);
      }
    }
    for (int checkpoint : log_checkpoints(max_step)) {
      std::vector<double> best_so_far;
      for (const auto& run : report.runs) {
        if (run.method != method || !run.error.empty() || run.trajectory.empty()) continue;
        if (run.trajectory.front().first > checkpoint) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [step, loss] : run.trajectory) {
          if (step > checkpoint) break;
          best = std::min(best, loss);
        }
        best_so_far.push_back(best);
      }
      if (!best_so_far.empty()) {
        out.push_back(detail::describe(method, "best_loss@" + std::to_string(checkpoint), best_so_far, opt));
      }
    }
  }
  return out;
}

}  // namespace promptinv::harness
