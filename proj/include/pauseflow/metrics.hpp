#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pauseflow/core.hpp"
#include "pauseflow/policy.hpp"

namespace pauseflow {

struct Interval {
  double rate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval. Throws UsageError for n_trials == 0 or bad counts.
Interval success_rate_ci(int n_success, int n_trials, double level = 0.90);

struct IdleFailureSummary {
  double fraction = 0.0;  // 0 when there are no failures
  int n_failures = 0;
  int n_idle_failures = 0;
};

IdleFailureSummary idle_failure_fraction(std::span<const Episode> episodes,
                                         const IdleConfig& config);

struct EvalReport {
  int n_trials = 0;
  int n_success = 0;
  double rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double idle_failure_fraction = 0.0;
  double mean_perturbations_per_episode = 0.0;  // triggers per episode
};

/// Number of maximal runs of perturbed steps, i.e. perturbation events.
int count_triggers(const Episode& episode);

EvalReport evaluate_episodes(std::span<const Episode> episodes, const IdleConfig& config,
                             double level = 0.90);

struct VarianceReport {
  std::optional<double> var_idle;
  std::optional<double> var_nonidle;
  int n_idle_states = 0;
  int n_nonidle_states = 0;
};

using DistributionFn = std::function<ChunkDistribution(std::span<const double> obs)>;

/// For every step, samples n_samples chunks at the step's observation and takes
/// the population variance of the first action per dimension, averaged over
/// dimensions. States strictly inside an idle segment are idle; all others,
/// including segment boundaries, are non-idle.
VarianceReport action_variance_report(const DistributionFn& policy,
                                      std::span<const Episode> episodes,
                                      const IdleConfig& config, int n_samples,
                                      std::uint64_t seed);

VarianceReport action_variance_report(const PolicyParams& policy,
                                      std::span<const Episode> episodes,
                                      const IdleConfig& config, int n_samples = 16,
                                      std::uint64_t seed = 0);

/// A CSV table with a fixed header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_real(double v);
std::string format_optional(const std::optional<double>& v);

/// Writes header plus one line per row; returns the number of rows.
std::size_t emit_report(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

const std::vector<std::string>& eval_header();
const std::vector<std::string>& variance_header();
std::vector<std::string> eval_row(const std::string& arm, const EvalReport& r);
std::vector<std::string> variance_row(const std::string& arm, const VarianceReport& r);

}  // namespace pauseflow
