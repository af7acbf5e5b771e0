#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pauseflow/core.hpp"
#include "pauseflow/envs.hpp"
#include "pauseflow/idle.hpp"
#include "pauseflow/metrics.hpp"
#include "pauseflow/perturb.hpp"
#include "pauseflow/policy.hpp"

namespace pauseflow {

enum class PerturbMode { None, Pip, Noise, Rnd };

std::string to_string(PerturbMode m);
/// Throws UsageError for unknown names.
PerturbMode parse_perturb_mode(const std::string& s);

struct RolloutConfig {
  PerturbMode mode = PerturbMode::None;
  IdleConfig idle;
  int cooldown = -1;  // -1 means idle.t_min
  PipConfig pip;
  NoiseConfig noise;
  RndConfig rnd;
  std::uint64_t rnd_seed = 0;
  std::uint64_t episode_seed = 0;
  bool deterministic_actions = true;  // execute chunk means instead of samples

  int effective_cooldown() const { return cooldown < 0 ? idle.t_min : cooldown; }
  void validate() const;
};

/// Anything that maps an observation to a chunk distribution.
struct ChunkPolicy {
  std::function<ChunkDistribution(std::span<const double>)> distribution;
  int obs_dim = 3;
  int chunk_len = 10;
  int open_loop = 4;
  int action_dim = 2;

  static ChunkPolicy from_params(const PolicyParams& params);
};

/// One episode: query a chunk, run open_loop steps of it, repeat. In pip mode
/// every post-step position feeds the streaming detector; a trigger replaces
/// the policy with the interpolated target for hold_steps steps.
Episode rollout(const ChunkPolicy& policy, const NarrowGateConfig& env,
                const RolloutConfig& config, std::string episode_id);

Episode rollout(const PolicyParams& policy, const NarrowGateConfig& env,
                const RolloutConfig& config, std::string episode_id);

/// n episodes with per-episode seeds derived from (master_seed, index). The
/// output is ordered by index and does not depend on `jobs`.
Dataset collect(const ChunkPolicy& policy, const NarrowGateConfig& env, int n,
                std::uint64_t master_seed, const RolloutConfig& config, int jobs = 1,
                const std::string& provenance = "rollout-round-0",
                const std::string& id_prefix = "rollout");

Dataset collect(const PolicyParams& policy, const NarrowGateConfig& env, int n,
                std::uint64_t master_seed, const RolloutConfig& config, int jobs = 1,
                const std::string& provenance = "rollout-round-0",
                const std::string& id_prefix = "rollout");

enum class ImproveMode { BcSuccess, Pmpo };

std::string to_string(ImproveMode m);
ImproveMode parse_improve_mode(const std::string& s);

struct ImproveConfig {
  ImproveMode mode = ImproveMode::Pmpo;
  double alpha = 0.9;
  double beta = 0.3;
  TrainSchedule schedule{.adam = {}, .batch_size = 64, .steps = 2000, .seed = 0};
  LabelOptions labels;
};

struct ImproveResult {
  TrainResult trained;
  std::size_t n_accepted = 0;
  std::size_t n_rejected = 0;
};

/// bc-success: BC on expert plus successful rollouts. pmpo: preference
/// fine-tuning with the input policy as the reference; the accepted set also
/// holds the expert transitions. Throws UsageError when nothing is accepted.
ImproveResult improve(const PolicyParams& policy, std::span<const Episode> expert,
                      std::span<const Episode> rollouts, const ImproveConfig& config);

/// Round collection samples from the policy and perturbs with PIP.
inline RolloutConfig default_collect_config() {
  RolloutConfig c;
  c.mode = PerturbMode::Pip;
  c.deterministic_actions = false;
  return c;
}

struct RoundConfig {
  int rounds = 1;
  int rollouts_per_round = 200;
  ImproveMode improve_mode = ImproveMode::Pmpo;
  double alpha = 0.9;
  double beta = 0.3;
  int finetune_steps = 2000;
  int batch_size = 64;
  nn::AdamConfig adam;
  int window = -1;
  RolloutConfig collect = default_collect_config();
  int eval_episodes = 200;
  PerturbMode eval_mode = PerturbMode::None;
  int jobs = 1;

  void validate() const;
};

struct RoundMetrics {
  int round = 0;
  int collected = 0;
  int collected_success = 0;
  std::size_t n_accepted = 0;
  std::size_t n_rejected = 0;
  EvalReport eval;
};

struct RoundRecord {
  PolicyParams policy;
  Dataset rollouts;
  RoundMetrics metrics;
};

/// Seeds shared by every arm and round so evaluations are paired.
std::uint64_t eval_seed(std::uint64_t master_seed);

/// Evaluates over n episodes seeded from eval_seed. Whether chunk means or
/// samples are executed follows config.deterministic_actions.
EvalReport evaluate_policy(const PolicyParams& policy, const NarrowGateConfig& env, int n,
                           std::uint64_t master_seed, RolloutConfig config, int jobs = 1);

/// Collect, improve, evaluate, for each round. When out_dir is set, writes
/// round_<k>/{rollouts.jsonl, policy.json, metrics.csv}.
std::vector<RoundRecord> run_rounds(const PolicyParams& initial_policy,
                                    std::span<const Episode> expert, const NarrowGateConfig& env,
                                    const RoundConfig& config, std::uint64_t master_seed,
                                    const std::optional<std::filesystem::path>& out_dir = {});

const std::vector<std::string>& round_metrics_header();
std::vector<std::string> round_metrics_row(const RoundMetrics& m, const std::string& arm);

json rollout_config_to_json(const RolloutConfig& c);
RolloutConfig rollout_config_from_json(const json& j);
json round_config_to_json(const RoundConfig& c);
RoundConfig round_config_from_json(const json& j);

}  // namespace pauseflow
