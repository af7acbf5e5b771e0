#include <doctest.h>

#include <cmath>

#include "pauseflow/config.hpp"
#include "pauseflow/envs.hpp"
#include "pauseflow/idle.hpp"

using namespace pauseflow;

namespace {

EnvState at(double x, double y, double g) {
  EnvState s;
  s.agent = {x, y};
  s.gate_center = g;
  s.initial_joints = s.agent;
  return s;
}

double norm(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

TEST_CASE("reset is deterministic and respects its ranges") {
  const NarrowGateConfig cfg;
  CHECK(reset(cfg, 42).first == reset(cfg, 42).first);
  double g_lo = 1.0, g_hi = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto [s, obs] = reset(cfg, seed);
    CHECK(s.agent[0] >= 0.1);
    CHECK(s.agent[0] <= 0.9);
    CHECK(s.agent[1] >= 0.05);
    CHECK(s.agent[1] <= 0.2);
    CHECK(s.agent[1] < cfg.wall_y);
    CHECK(s.initial_joints == s.agent);
    CHECK(obs == Vec{s.agent[0], s.agent[1], s.gate_center});
    g_lo = std::min(g_lo, s.gate_center);
    g_hi = std::max(g_hi, s.gate_center);
  }
  CHECK(g_lo >= 0.3);
  CHECK(g_hi <= 0.7);
}

TEST_CASE("step moves at most max_step toward the target") {
  const NarrowGateConfig cfg;
  const auto r = step(cfg, at(0.5, 0.1, 0.5), Vec{0.5, 0.9});
  CHECK(r.state.agent[0] == doctest::Approx(0.5));
  CHECK(r.state.agent[1] == doctest::Approx(0.15));
  CHECK(r.state.step_count == 1);
  CHECK_FALSE(r.done);
}

TEST_CASE("step halts at the wall outside the gate") {
  const NarrowGateConfig cfg;
  const auto r = step(cfg, at(0.2, 0.48, 0.5), Vec{0.2, 0.6});
  CHECK(r.state.agent[0] == doctest::Approx(0.2));
  CHECK(r.state.agent[1] == doctest::Approx(0.499));
}

TEST_CASE("step passes through the gate") {
  const NarrowGateConfig cfg;
  const auto r = step(cfg, at(0.5, 0.48, 0.5), Vec{0.5, 0.52});
  CHECK(r.state.agent[0] == doctest::Approx(0.5));
  CHECK(r.state.agent[1] == doctest::Approx(0.52));
}

TEST_CASE("step blocks from above on the upper side") {
  const NarrowGateConfig cfg;
  const auto r = step(cfg, at(0.2, 0.52, 0.5), Vec{0.2, 0.3});
  CHECK(r.state.agent[1] == doctest::Approx(0.501));
}

TEST_CASE("step reports success and horizon") {
  NarrowGateConfig cfg;
  const auto r = step(cfg, at(0.5, 0.9, 0.5), Vec{0.5, 0.92});
  CHECK(r.success);
  CHECK(r.done);

  cfg.horizon = 2;
  auto s = at(0.1, 0.1, 0.5);
  auto r1 = step(cfg, s, Vec{0.1, 0.1});
  CHECK_FALSE(r1.done);
  auto r2 = step(cfg, r1.state, Vec{0.1, 0.1});
  CHECK(r2.done);
  CHECK_FALSE(r2.success);
  CHECK_THROWS_AS(step(cfg, r2.state, Vec{0.1, 0.1}), UsageError);
}

TEST_CASE("step rejects bad actions") {
  const NarrowGateConfig cfg;
  CHECK_THROWS_AS(step(cfg, at(0.5, 0.1, 0.5), Vec{0.5}), UsageError);
  CHECK_THROWS_AS(step(cfg, at(0.5, 0.1, 0.5), Vec{NAN, 0.2}), UsageError);
}

TEST_CASE("random actions keep motion bound, wall integrity and determinism") {
  const NarrowGateConfig cfg;
  Rng rng(11);
  for (int ep = 0; ep < 200; ++ep) {
    auto [s, obs] = reset(cfg, rng.next_u64());
    auto s2 = s;
    bool done = false;
    while (!done) {
      Vec a{rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
      if (rng.bernoulli(0.5)) a = {s.gate_center + rng.normal(0.0, 0.03), s.agent[1] + 0.05};
      const auto r = step(cfg, s, a);
      const auto r2 = step(cfg, s2, a);
      REQUIRE(r.state == r2.state);
      const Point p = s.agent, q = r.state.agent;
      CHECK(norm(p, q) <= cfg.max_step + 1e-9);
      CHECK(q[0] >= 0.0);
      CHECK(q[0] <= 1.0);
      CHECK(q[1] >= 0.0);
      CHECK(q[1] <= 1.0);
      if ((p[1] < cfg.wall_y) != (q[1] < cfg.wall_y)) {
        const double f = (cfg.wall_y - p[1]) / (q[1] - p[1]);
        const double cx = p[0] + f * (q[0] - p[0]);
        CHECK(std::abs(cx - s.gate_center) <= 0.5 * cfg.gate_width + 1e-12);
      }
      s = r.state;
      s2 = r2.state;
      done = r.done;
    }
  }
}

TEST_CASE("config validation") {
  NarrowGateConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.gate_width = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = {};
  cfg.horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  ExpertConfig ex;
  ex.precision_step = 0.06;
  CHECK_THROWS_AS(ex.validate(NarrowGateConfig{}), UsageError);
  ex = {};
  ex.pause_mean = -1.0;
  CHECK_THROWS_AS(ex.validate(NarrowGateConfig{}), UsageError);
}

TEST_CASE("expert heads for the waypoint when far from the gate") {
  const NarrowGateConfig env;
  ExpertConfig ex;
  ex.target_noise_std = 0.0;
  Rng rng(1);
  const auto s = at(0.2, 0.1, 0.5);
  const auto [a, mem] = expert_action(env, s, ex, {}, rng);
  CHECK(a[0] == doctest::Approx(0.5));
  CHECK(a[1] == doctest::Approx(0.44));
  CHECK(mem.phase == ExpertPhase::Approach);
  const auto r = step(env, s, a);
  CHECK(norm(s.agent, r.state.agent) == doctest::Approx(env.max_step));
}

TEST_CASE("expert holds near the gate mouth while the budget lasts") {
  const NarrowGateConfig env;
  const ExpertConfig ex;
  const auto s = at(0.5, 0.45, 0.5);
  int close = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    Rng rng(i);
    const auto [a, mem] = expert_action(env, s, ex, {3, ExpertPhase::Approach}, rng);
    CHECK(mem.pause_budget == 2);
    CHECK(mem.phase == ExpertPhase::Pause);
    const bool in_x = std::abs(a[0] - s.agent[0]) <= 3 * ex.pause_jitter_std;
    const bool in_y = std::abs(a[1] - s.agent[1]) <= 3 * ex.pause_jitter_std;
    close += in_x && in_y;
  }
  // Both dimensions inside 3 sigma: 0.9973^2.
  CHECK(static_cast<double>(close) / trials > 0.98);
}

TEST_CASE("expert creeps at the precision step once the pause ends") {
  const NarrowGateConfig env;
  const ExpertConfig ex;
  Rng rng(3);
  const auto s = at(0.45, 0.46, 0.5);
  const auto [a, mem] = expert_action(env, s, ex, {0, ExpertPhase::Pause}, rng);
  CHECK(mem.phase == ExpertPhase::Creep);
  CHECK(std::hypot(a[0] - 0.45, a[1] - 0.46) == doctest::Approx(ex.precision_step));
}

TEST_CASE("expert targets the goal above the wall") {
  const NarrowGateConfig env;
  ExpertConfig ex;
  ex.target_noise_std = 0.0;
  Rng rng(4);
  const auto [a, mem] = expert_action(env, at(0.5, 0.55, 0.5), ex, {0, ExpertPhase::Creep}, rng);
  CHECK(mem.phase == ExpertPhase::Goal);
  CHECK(a == Vec{env.goal[0], env.goal[1]});
}

TEST_CASE("expert completes every episode over 500 seeds") {
  const NarrowGateConfig env;
  const ExpertConfig ex;
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed)
    successes += run_expert_episode(env, ex, derive_seed(1234, {seed}), "e").success;
  CHECK(successes == 500);
}

TEST_CASE("gen_demos") {
  const NarrowGateConfig env;
  const ExpertConfig ex;
  const Dataset a = gen_demos(env, ex, 10, 7);
  CHECK(a.episodes.size() == 10);
  for (const auto& e : a.episodes) {
    CHECK(e.success);
    CHECK(e.env_name == "narrow_gate_v1");
    CHECK(validate_episode(e, kNarrowGateDims).ok);
  }
  CHECK(gen_demos(env, ex, 10, 7).episodes == a.episodes);
  CHECK(gen_demos(env, ex, 10, 8).episodes != a.episodes);
  CHECK_THROWS_AS(gen_demos(env, ex, 0, 7), UsageError);
}

TEST_CASE("a broken expert is reported after 10n attempts") {
  NarrowGateConfig env;
  env.horizon = 3;
  CHECK_THROWS_AS(gen_demos(env, ExpertConfig{}, 2, 1), Error);
}

TEST_CASE("demos contain pauses") {
  const NarrowGateConfig env;
  const ExpertConfig ex;
  const Dataset ds = gen_demos(env, ex, 100, 21);
  long slow = 0, total = 0;
  for (const auto& e : ds.episodes) {
    const auto p = e.positions();
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      slow += std::hypot(p[i + 1][0] - p[i][0], p[i + 1][1] - p[i][1]) < 0.0015;
      ++total;
    }
  }
  CHECK(static_cast<double>(slow) / total > 0.1);
}

TEST_CASE("idle segments appear at least as often as long pauses") {
  // A pause of n >= t_min + 1 held steps yields a detectable segment, and the
  // pause length is geometric on {0,1,...} with mean m, so
  // P(n >= t_min + 1) = (m / (m + 1))^(t_min + 1).
  const NarrowGateConfig env;
  const ExpertConfig ex;
  const IdleConfig idle;
  const int n = 500;
  const Dataset ds = gen_demos(env, ex, n, 99);
  int with_segment = 0;
  for (const auto& e : ds.episodes) with_segment += !detect_idle_segments(e.positions(), idle).empty();
  const double p_long = std::pow(ex.pause_mean / (ex.pause_mean + 1.0), idle.t_min + 1);
  const double se = std::sqrt(p_long * (1.0 - p_long) / n);
  CHECK(static_cast<double>(with_segment) / n >= p_long - 3.0 * se);
}

TEST_CASE("config json round trip and strict keys") {
  NarrowGateConfig cfg;
  cfg.gate_width = 0.03;
  cfg.horizon = 150;
  const auto back = env_config_from_json(env_config_to_json(cfg));
  CHECK(back.gate_width == cfg.gate_width);
  CHECK(back.horizon == cfg.horizon);
  ExpertConfig ex;
  ex.pause_mean = 3.5;
  CHECK(expert_config_from_json(expert_config_to_json(ex)).pause_mean == 3.5);
  json j = experiment_config_to_json(default_experiment_config());
  j["expert"]["pause_man"] = 3;
  CHECK_THROWS_AS(experiment_config_from_json(j), UsageError);
}
