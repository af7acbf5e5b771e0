#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>

#include "pauseflow/core.hpp"
#include "pauseflow/envs.hpp"
#include "pauseflow/flywheel.hpp"
#include "pauseflow/policy.hpp"

namespace pauseflow {

inline constexpr int kConfigVersion = 1;

struct TrainSettings {
  int steps = 20000;
  int batch_size = 64;
  nn::AdamConfig adam;
};

/// Everything an end-to-end experiment needs. All numeric defaults live here.
struct ExperimentConfig {
  NarrowGateConfig env;
  ExpertConfig expert;
  PolicyConfig policy;
  int demos_n = 200;
  std::uint64_t demos_seed = 0;
  TrainSettings train;
  RolloutConfig rollout;  // evaluation-time settings for idle/pip/noise/rnd
  RoundConfig rounds;
};

ExperimentConfig default_experiment_config();

json experiment_config_to_json(const ExperimentConfig& c);

/// Strict parse: unknown keys and type errors raise UsageError naming the
/// offending field path (e.g. "rounds.alpha").
ExperimentConfig experiment_config_from_json(const json& j);

/// Throws UsageError naming `path.key` for the first key not in `allowed`.
void check_known_keys(const json& j, std::initializer_list<const char*> allowed,
                      const std::string& path);

json load_json_file(const std::string& path);

}  // namespace pauseflow
