#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "pauseflow/core.hpp"
#include "pauseflow/rng.hpp"

namespace pauseflow {

using Point = std::array<double, 2>;

inline constexpr const char* kNarrowGateName = "narrow_gate_v1";
inline constexpr std::size_t kNarrowGateObsDim = 3;
inline constexpr std::size_t kNarrowGateJointDim = 2;
inline constexpr EnvDims kNarrowGateDims{kNarrowGateObsDim, kNarrowGateJointDim};

/// A point agent below a horizontal wall must pass through a narrow gate to
/// reach a goal above the wall. Actions are absolute target positions.
struct NarrowGateConfig {
  double gate_width = 0.04;
  double gate_x_lo = 0.3;
  double gate_x_hi = 0.7;
  double max_step = 0.05;
  Point goal{0.5, 0.92};
  double goal_radius = 0.05;
  int horizon = 200;
  double wall_y = 0.5;
  double contact_margin = 0.001;

  void validate() const;
};

struct EnvState {
  Point agent{};
  double gate_center = 0.5;
  int step_count = 0;
  Point initial_joints{};
  bool done = false;

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState state;
  Vec obs;
  bool success = false;
  bool done = false;
};

Vec observe(const EnvState& state);

/// Agent uniform in [0.1,0.9]x[0.05,0.2], gate center uniform in the gate range.
std::pair<EnvState, Vec> reset(const NarrowGateConfig& config, std::uint64_t seed);

/// Moves toward `action` by at most max_step, clips to the unit square and
/// halts at the wall when the segment crosses it outside the gate.
/// Throws UsageError when stepping a finished episode or on non-finite input.
StepResult step(const NarrowGateConfig& config, const EnvState& state,
                std::span<const double> action);

bool at_goal(const NarrowGateConfig& config, const Point& p);

struct ExpertConfig {
  double pause_mean = 8.0;          // geometric pause length, steps
  double pause_jitter_std = 0.0005; // per-dimension hold jitter
  double precision_zone_radius = 0.1;
  double precision_step = 0.01;
  double target_noise_std = 0.02;   // demonstrator noise on full-speed targets

  void validate(const NarrowGateConfig& env) const;
};

enum class ExpertPhase { Approach, Pause, Creep, Goal };

struct ExpertMemory {
  int pause_budget = -1;  // -1 until drawn at the first call of an episode
  ExpertPhase phase = ExpertPhase::Approach;
};

Point gate_mouth(const NarrowGateConfig& config, const EnvState& state);

/// Scripted demonstrator. Approaches the gate at full speed, pauses on entering
/// the precision zone, creeps through the gate, then heads for the goal.
std::pair<Vec, ExpertMemory> expert_action(const NarrowGateConfig& env, const EnvState& state,
                                           const ExpertConfig& config, ExpertMemory memory,
                                           Rng& rng);

/// Runs the expert for one episode from reset(seed).
Episode run_expert_episode(const NarrowGateConfig& env, const ExpertConfig& expert,
                           std::uint64_t seed, std::string episode_id);

/// n successful demonstrations. Failed attempts are regenerated with a fresh
/// derived seed and reported through `log`. Throws Error after 10n attempts.
Dataset gen_demos(const NarrowGateConfig& env, const ExpertConfig& expert, int n,
                  std::uint64_t seed,
                  const std::function<void(const std::string&)>& log = {});

json env_config_to_json(const NarrowGateConfig& c);
NarrowGateConfig env_config_from_json(const json& j);
json expert_config_to_json(const ExpertConfig& c);
ExpertConfig expert_config_from_json(const json& j);

}  // namespace pauseflow
