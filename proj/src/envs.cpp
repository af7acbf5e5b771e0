#include "pauseflow/envs.hpp"

#include <algorithm>
#include <cmath>

namespace pauseflow {

namespace {

// Waypoint drop below the wall and creep target rise above it.
constexpr double kApproachDrop = 0.06;
constexpr double kCreepRise = 0.06;

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

Point move_toward(const Point& p, const Point& target, double cap) {
  const double d = dist(p, target);
  if (d <= cap) return target;
  const double f = cap / d;
  return {p[0] + f * (target[0] - p[0]), p[1] + f * (target[1] - p[1])};
}

// Draws from a geometric distribution on {0, 1, ...} with the given mean.
int draw_geometric(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  const double p = 1.0 / (1.0 + mean);
  double u;
  do {
    u = rng.uniform();
  } while (u <= 0.0);
  return static_cast<int>(std::floor(std::log(u) / std::log1p(-p)));
}

}  // namespace

void NarrowGateConfig::validate() const {
  if (!(gate_width > 0.0 && gate_width < 1.0)) throw UsageError("gate_width must be in (0,1)");
  if (!(gate_x_lo <= gate_x_hi)) throw UsageError("gate_x_range must be ordered");
  if (!(max_step > 0.0)) throw UsageError("max_step must be > 0");
  if (!(goal_radius > 0.0)) throw UsageError("goal_radius must be > 0");
  if (horizon < 1) throw UsageError("horizon must be >= 1");
  if (!(contact_margin >= 0.0)) throw UsageError("contact_margin must be >= 0");
}

Vec observe(const EnvState& s) { return {s.agent[0], s.agent[1], s.gate_center}; }

std::pair<EnvState, Vec> reset(const NarrowGateConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x7e5e7}));
  EnvState s;
  s.agent[0] = rng.uniform(0.1, 0.9);
  s.agent[1] = rng.uniform(0.05, 0.2);
  s.gate_center = rng.uniform(config.gate_x_lo, config.gate_x_hi);
  s.initial_joints = s.agent;
  return {s, observe(s)};
}

bool at_goal(const NarrowGateConfig& config, const Point& p) {
  return dist(p, config.goal) < config.goal_radius;
}

StepResult step(const NarrowGateConfig& config, const EnvState& state,
                std::span<const double> action) {
  if (state.done || state.step_count >= config.horizon)
    throw UsageError("step called on a finished episode");
  if (action.size() != kNarrowGateJointDim) throw UsageError("action must have 2 entries");
  if (!std::isfinite(action[0]) || !std::isfinite(action[1]))
    throw UsageError("action must be finite");

  const Point p = state.agent;
  Point q = move_toward(p, {action[0], action[1]}, config.max_step);
  q[0] = std::clamp(q[0], 0.0, 1.0);
  q[1] = std::clamp(q[1], 0.0, 1.0);

  const double w = config.wall_y;
  const bool p_below = p[1] < w;
  const bool q_below = q[1] < w;
  if (p_below != q_below) {
    const double frac = (w - p[1]) / (q[1] - p[1]);
    const double cx = p[0] + frac * (q[0] - p[0]);
    const double half = 0.5 * config.gate_width;
    const double g = state.gate_center;
    if (cx < g - half || cx > g + half) {
      q = {cx, p_below ? w - config.contact_margin : w + config.contact_margin};
    }
  }

  StepResult r;
  r.state = state;
  r.state.agent = q;
  r.state.step_count = state.step_count + 1;
  r.success = at_goal(config, q);
  r.done = r.success || r.state.step_count >= config.horizon;
  r.state.done = r.done;
  r.obs = observe(r.state);
  return r;
}

void ExpertConfig::validate(const NarrowGateConfig& env) const {
  if (!(pause_mean >= 0.0)) throw UsageError("pause_mean must be >= 0");
  if (!(pause_jitter_std >= 0.0)) throw UsageError("pause_jitter_std must be >= 0");
  if (!(precision_step > 0.0 && precision_step <= env.max_step))
    throw UsageError("precision_step must be in (0, max_step]");
  if (!(precision_zone_radius > 0.0)) throw UsageError("precision_zone_radius must be > 0");
  if (!(target_noise_std >= 0.0)) throw UsageError("target_noise_std must be >= 0");
}

Point gate_mouth(const NarrowGateConfig& config, const EnvState& state) {
  return {state.gate_center, config.wall_y};
}

std::pair<Vec, ExpertMemory> expert_action(const NarrowGateConfig& env, const EnvState& state,
                                           const ExpertConfig& config, ExpertMemory memory,
                                           Rng& rng) {
  if (memory.pause_budget < 0) memory.pause_budget = draw_geometric(config.pause_mean, rng);

  const Point p = state.agent;
  const double g = state.gate_center;
  const Point mouth = gate_mouth(env, state);

  if (p[1] > env.wall_y) memory.phase = ExpertPhase::Goal;
  if (memory.phase == ExpertPhase::Approach && dist(p, mouth) <= config.precision_zone_radius)
    memory.phase = ExpertPhase::Pause;
  if (memory.phase == ExpertPhase::Pause && memory.pause_budget <= 0)
    memory.phase = ExpertPhase::Creep;

  auto noisy = [&](Point target) -> Vec {
    if (config.target_noise_std > 0.0) {
      target[0] += rng.normal(0.0, config.target_noise_std);
      target[1] += rng.normal(0.0, config.target_noise_std);
    }
    return {target[0], target[1]};
  };

  switch (memory.phase) {
    case ExpertPhase::Approach:
      return {noisy({g, env.wall_y - kApproachDrop}), memory};
    case ExpertPhase::Pause: {
      --memory.pause_budget;
      Vec a{p[0], p[1]};
      if (config.pause_jitter_std > 0.0) {
        a[0] += rng.normal(0.0, config.pause_jitter_std);
        a[1] += rng.normal(0.0, config.pause_jitter_std);
      }
      return {a, memory};
    }
    case ExpertPhase::Creep: {
      // Straight at the far side of the gate, one precision step at a time. A
      // path that clips the wall halts there and slides in over later steps.
      const Point target{g, env.wall_y + kCreepRise};
      const double dx = target[0] - p[0], dy = target[1] - p[1];
      const double dist = std::hypot(dx, dy);
      const double k = dist > config.precision_step ? config.precision_step / dist : 1.0;
      return {Vec{p[0] + k * dx, p[1] + k * dy}, memory};
    }
    case ExpertPhase::Goal:
      return {noisy(env.goal), memory};
  }
  return {Vec{p[0], p[1]}, memory};
}

Episode run_expert_episode(const NarrowGateConfig& env, const ExpertConfig& expert,
                           std::uint64_t seed, std::string episode_id) {
  auto [state, obs] = reset(env, seed);
  Rng rng(derive_seed(seed, {0xe4e47}));
  ExpertMemory memory;
  Episode ep;
  ep.episode_id = std::move(episode_id);
  ep.env_name = kNarrowGateName;
  ep.seed = seed;
  bool done = false;
  while (!done) {
    auto [action, next_memory] = expert_action(env, state, expert, memory, rng);
    memory = next_memory;
    ep.steps.push_back({state.step_count, obs, {state.agent[0], state.agent[1]}, action, false});
    StepResult r = step(env, state, action);
    state = r.state;
    obs = r.obs;
    done = r.done;
    ep.success = r.success;
  }
  ep.final_joints = {state.agent[0], state.agent[1]};
  return ep;
}

Dataset gen_demos(const NarrowGateConfig& env, const ExpertConfig& expert, int n,
                  std::uint64_t seed, const std::function<void(const std::string&)>& log) {
  if (n < 1) throw UsageError("gen_demos needs n >= 1");
  env.validate();
  expert.validate(env);
  Dataset ds;
  ds.provenance = "expert";
  long attempts = 0;
  const long max_attempts = 10L * n;
  for (int i = 0; i < n; ++i) {
    for (std::uint64_t retry = 0;; ++retry) {
      if (++attempts > max_attempts)
        throw Error("expert failed to produce " + std::to_string(n) + " successes in " +
                    std::to_string(max_attempts) + " attempts");
      const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(i), retry});
      Episode ep = run_expert_episode(env, expert, s, "demo-" + std::to_string(i));
      if (ep.success) {
        ds.episodes.push_back(std::move(ep));
        break;
      }
      if (log) log("demo " + std::to_string(i) + " attempt " + std::to_string(retry) +
                   " failed; regenerating");
    }
  }
  return ds;
}

json env_config_to_json(const NarrowGateConfig& c) {
  return {{"gate_width", c.gate_width},
          {"gate_x_range", {c.gate_x_lo, c.gate_x_hi}},
          {"max_step", c.max_step},
          {"goal", {c.goal[0], c.goal[1]}},
          {"goal_radius", c.goal_radius},
          {"horizon", c.horizon},
          {"wall_y", c.wall_y},
          {"contact_margin", c.contact_margin}};
}

NarrowGateConfig env_config_from_json(const json& j) {
  NarrowGateConfig c;
  c.gate_width = j.value("gate_width", c.gate_width);
  if (j.contains("gate_x_range")) {
    const auto& r = j.at("gate_x_range");
    if (!r.is_array() || r.size() != 2) throw UsageError("gate_x_range: expected [lo, hi]");
    c.gate_x_lo = r[0].get<double>();
    c.gate_x_hi = r[1].get<double>();
  }
  c.max_step = j.value("max_step", c.max_step);
  if (j.contains("goal")) {
    const auto& g = j.at("goal");
    if (!g.is_array() || g.size() != 2) throw UsageError("goal: expected [x, y]");
    c.goal = {g[0].get<double>(), g[1].get<double>()};
  }
  c.goal_radius = j.value("goal_radius", c.goal_radius);
  c.horizon = j.value("horizon", c.horizon);
  c.wall_y = j.value("wall_y", c.wall_y);
  c.contact_margin = j.value("contact_margin", c.contact_margin);
  c.validate();
  return c;
}

json expert_config_to_json(const ExpertConfig& c) {
  return {{"pause_mean", c.pause_mean},
          {"pause_jitter_std", c.pause_jitter_std},
          {"precision_zone_radius", c.precision_zone_radius},
          {"precision_step", c.precision_step},
          {"target_noise_std", c.target_noise_std}};
}

ExpertConfig expert_config_from_json(const json& j) {
  ExpertConfig c;
  c.pause_mean = j.value("pause_mean", c.pause_mean);
  c.pause_jitter_std = j.value("pause_jitter_std", c.pause_jitter_std);
  c.precision_zone_radius = j.value("precision_zone_radius", c.precision_zone_radius);
  c.precision_step = j.value("precision_step", c.precision_step);
  c.target_noise_std = j.value("target_noise_std", c.target_noise_std);
  return c;
}

}  // namespace pauseflow
