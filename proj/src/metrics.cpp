#include "pauseflow/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "pauseflow/idle.hpp"
#include "pauseflow/rng.hpp"

namespace pauseflow {

Interval success_rate_ci(int n_success, int n_trials, double level) {
  if (n_trials <= 0) throw UsageError("success_rate_ci needs n_trials >= 1");
  if (n_success < 0 || n_success > n_trials) throw UsageError("n_success must be in [0, n_trials]");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("level must be in (0, 1)");
  const double n = n_trials;
  const double p = n_success / n;
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  Interval r{p, std::max(0.0, center - half), std::min(1.0, center + half)};
  // Exact boundaries at 0 and n successes; also guards rounding at the edges.
  if (n_success == 0) r.lo = 0.0;
  if (n_success == n_trials) r.hi = 1.0;
  r.lo = std::min(r.lo, p);
  r.hi = std::max(r.hi, p);
  return r;
}

IdleFailureSummary idle_failure_fraction(std::span<const Episode> episodes,
                                         const IdleConfig& config) {
  IdleFailureSummary s;
  for (const auto& e : episodes) {
    if (e.success) continue;
    ++s.n_failures;
    if (!detect_idle_segments(e.positions(), config).empty()) ++s.n_idle_failures;
  }
  if (s.n_failures > 0) s.fraction = static_cast<double>(s.n_idle_failures) / s.n_failures;
  return s;
}

int count_triggers(const Episode& episode) {
  int n = 0;
  bool prev = false;
  for (const auto& s : episode.steps) {
    if (s.perturbed && !prev) ++n;
    prev = s.perturbed;
  }
  return n;
}

EvalReport evaluate_episodes(std::span<const Episode> episodes, const IdleConfig& config,
                             double level) {
  EvalReport r;
  r.n_trials = static_cast<int>(episodes.size());
  int triggers = 0;
  for (const auto& e : episodes) {
    r.n_success += e.success ? 1 : 0;
    triggers += count_triggers(e);
  }
  if (r.n_trials > 0) {
    const Interval ci = success_rate_ci(r.n_success, r.n_trials, level);
    r.rate = ci.rate;
    r.ci_lo = ci.lo;
    r.ci_hi = ci.hi;
    r.mean_perturbations_per_episode = static_cast<double>(triggers) / r.n_trials;
  }
  r.idle_failure_fraction = idle_failure_fraction(episodes, config).fraction;
  return r;
}

VarianceReport action_variance_report(const DistributionFn& policy,
                                      std::span<const Episode> episodes,
                                      const IdleConfig& config, int n_samples,
                                      std::uint64_t seed) {
  if (n_samples < 1) throw UsageError("n_samples must be >= 1");
  Rng rng(derive_seed(seed, {0x5a4}));
  double sum_idle = 0.0, sum_non = 0.0;
  VarianceReport r;
  for (const auto& e : episodes) {
    const auto segs = detect_idle_segments(e.positions(), config);
    for (int t = 0; t < static_cast<int>(e.steps.size()); ++t) {
      bool idle = false;
      for (const auto& s : segs) idle = idle || (t > s.start && t < s.end);
      const ChunkDistribution dist = policy(e.steps[t].obs);
      const Eigen::Index dims = dist.means.cols();
      Eigen::MatrixXd first(n_samples, dims);
      for (int i = 0; i < n_samples; ++i) first.row(i) = sample_chunk(dist, rng).row(0);
      double var = 0.0;
      for (Eigen::Index a = 0; a < dims; ++a) {
        const double mean = first.col(a).mean();
        var += (first.col(a).array() - mean).square().sum() / n_samples;
      }
      var /= static_cast<double>(dims);
      if (idle) {
        sum_idle += var;
        ++r.n_idle_states;
      } else {
        sum_non += var;
        ++r.n_nonidle_states;
      }
    }
  }
  if (r.n_idle_states > 0) r.var_idle = sum_idle / r.n_idle_states;
  if (r.n_nonidle_states > 0) r.var_nonidle = sum_non / r.n_nonidle_states;
  return r;
}

VarianceReport action_variance_report(const PolicyParams& policy,
                                      std::span<const Episode> episodes,
                                      const IdleConfig& config, int n_samples,
                                      std::uint64_t seed) {
  return action_variance_report(
      [&policy](std::span<const double> obs) { return predict_chunk(policy, obs); }, episodes,
      config, n_samples, seed);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

std::size_t emit_report(const std::filesystem::path& path, const CsvTable& table) {
  std::string text;
  auto line = [&text](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text += ',';
      text += cells[i];
    }
    text += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw UsageError("CSV row width does not match header");
    line(row);
  }
  write_text_file(path, text);
  return table.rows.size();
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

const std::vector<std::string>& eval_header() {
  static const std::vector<std::string> h{"arm",   "n_trials", "n_success",
                                          "rate",  "ci_lo",    "ci_hi",
                                          "idle_failure_fraction", "mean_perturbations"};
  return h;
}

const std::vector<std::string>& variance_header() {
  static const std::vector<std::string> h{"arm", "var_idle", "var_nonidle", "n_idle_states",
                                          "n_nonidle_states"};
  return h;
}

std::vector<std::string> eval_row(const std::string& arm, const EvalReport& r) {
  return {arm,
          std::to_string(r.n_trials),
          std::to_string(r.n_success),
          format_real(r.rate),
          format_real(r.ci_lo),
          format_real(r.ci_hi),
          format_real(r.idle_failure_fraction),
          format_real(r.mean_perturbations_per_episode)};
}

std::vector<std::string> variance_row(const std::string& arm, const VarianceReport& r) {
  return {arm, format_optional(r.var_idle), format_optional(r.var_nonidle),
          std::to_string(r.n_idle_states), std::to_string(r.n_nonidle_states)};
}

}  // namespace pauseflow
