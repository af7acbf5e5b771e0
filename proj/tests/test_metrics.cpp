#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "oracles.hpp"
#include "pauseflow/metrics.hpp"

using namespace pauseflow;
using nn::Matrix;

namespace {

// An episode whose positions stay fixed from `idle_from` onwards.
Episode episode(const std::string& id, bool success, int length, int idle_from) {
  Episode e;
  e.episode_id = id;
  e.env_name = "narrow_gate_v1";
  e.success = success;
  double y = 0.1;
  for (int t = 0; t < length; ++t) {
    if (t < idle_from) y += 0.01;
    e.steps.push_back({t, {0.5, y, 0.5}, {0.5, y}, {0.5, y}, false});
  }
  e.final_joints = {0.5, y};
  return e;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pauseflow_metrics_" + name);
}

}  // namespace

TEST_CASE("wilson interval examples") {
  const Interval zero = success_rate_ci(0, 10);
  CHECK(zero.rate == 0.0);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi > 0.0);
  const Interval all = success_rate_ci(10, 10);
  CHECK(all.hi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(all.lo < 1.0);

  const Interval mid = success_rate_ci(80, 100);
  const auto [lo, hi] = oracle::wilson_by_inversion(80, 100, 0.90);
  CHECK(mid.lo == doctest::Approx(lo).epsilon(1e-9));
  CHECK(mid.hi == doctest::Approx(hi).epsilon(1e-9));
  CHECK(mid.lo == doctest::Approx(0.7267).epsilon(1e-3));
  CHECK(mid.hi == doctest::Approx(0.8575).epsilon(1e-3));

  CHECK_THROWS_AS(success_rate_ci(0, 0), UsageError);
  CHECK_THROWS_AS(success_rate_ci(5, 4), UsageError);
  CHECK_THROWS_AS(success_rate_ci(-1, 4), UsageError);
  CHECK_THROWS_AS(success_rate_ci(1, 4, 1.0), UsageError);
}

TEST_CASE("wilson interval properties") {
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_index(500));
    const int k = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n) + 1));
    const Interval a = success_rate_ci(k, n, 0.80);
    const Interval b = success_rate_ci(k, n, 0.95);
    CHECK(a.lo >= 0.0);
    CHECK(a.hi <= 1.0);
    CHECK(a.lo <= a.rate + 1e-15);
    CHECK(a.rate <= a.hi + 1e-15);
    CHECK(b.lo <= a.lo + 1e-15);
    CHECK(b.hi >= a.hi - 1e-15);
    const auto [lo, hi] = oracle::wilson_by_inversion(k, n, 0.80);
    CHECK(std::abs(a.lo - lo) < 1e-9);
    CHECK(std::abs(a.hi - hi) < 1e-9);
  }
}

TEST_CASE("idle failure fraction examples") {
  const IdleConfig cfg;
  std::vector<Episode> eps{episode("a", false, 40, 10), episode("b", false, 40, 40),
                           episode("c", true, 40, 10)};
  IdleFailureSummary s = idle_failure_fraction(eps, cfg);
  CHECK(s.n_failures == 2);
  CHECK(s.n_idle_failures == 1);
  CHECK(s.fraction == 0.5);

  std::vector<Episode> wins{episode("a", true, 40, 10)};
  CHECK(idle_failure_fraction(wins, cfg).fraction == 0.0);
  CHECK(idle_failure_fraction(std::vector<Episode>{}, cfg).n_failures == 0);

  std::vector<Episode> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(episode(std::to_string(i), false, 40, i < 7 ? 5 : 40));
  CHECK(idle_failure_fraction(ten, cfg).fraction == doctest::Approx(0.7));
}

TEST_CASE("idle failure fraction ignores order and successes") {
  const IdleConfig cfg;
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Episode> eps;
    for (int i = 0; i < 12; ++i)
      eps.push_back(episode(std::to_string(i), rng.bernoulli(0.3), 30,
                            static_cast<int>(rng.uniform_index(31))));
    const double f = idle_failure_fraction(eps, cfg).fraction;
    std::vector<Episode> shuffled = eps;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[0], shuffled[5]);
    CHECK(idle_failure_fraction(shuffled, cfg).fraction == f);
    shuffled.push_back(episode("win", true, 30, 3));
    CHECK(idle_failure_fraction(shuffled, cfg).fraction == f);
  }
}

TEST_CASE("count_triggers and evaluate_episodes") {
  Episode e = episode("p", false, 20, 20);
  for (int t : {3, 4, 5, 9, 10, 15}) e.steps[t].perturbed = true;
  CHECK(count_triggers(e) == 3);
  CHECK(count_triggers(episode("q", true, 5, 5)) == 0);

  std::vector<Episode> eps{e, episode("w", true, 20, 20)};
  const EvalReport r = evaluate_episodes(eps, IdleConfig{});
  CHECK(r.n_trials == 2);
  CHECK(r.n_success == 1);
  CHECK(r.rate == 0.5);
  CHECK(r.mean_perturbations_per_episode == 1.5);
  CHECK(r.ci_lo < 0.5);
  CHECK(r.ci_hi > 0.5);
}

TEST_CASE("action variance report") {
  const IdleConfig cfg;
  std::vector<Episode> eps{episode("a", false, 40, 10)};
  auto laplace = [](double b) {
    return [b](std::span<const double>) {
      return ChunkDistribution{Matrix::Constant(10, 2, 0.3), Matrix::Constant(10, 2, b)};
    };
  };

  SUBCASE("matches the Laplace variance") {
    const VarianceReport r = action_variance_report(laplace(0.05), eps, cfg, 1000, 1);
    REQUIRE(r.var_idle.has_value());
    REQUIRE(r.var_nonidle.has_value());
    const double truth = 2.0 * 0.05 * 0.05;
    CHECK(std::abs(*r.var_idle / truth - 1.0) < 0.10);
    CHECK(std::abs(*r.var_nonidle / truth - 1.0) < 0.10);
  }
  SUBCASE("state classification") {
    const VarianceReport r = action_variance_report(laplace(0.05), eps, cfg, 2, 1);
    // Positions 9..40 coincide, so the segment is (9, 40) and steps 10..39 are inside.
    CHECK(r.n_idle_states == 30);
    CHECK(r.n_nonidle_states == 10);
  }
  SUBCASE("a single sample has no spread") {
    const VarianceReport r = action_variance_report(laplace(0.05), eps, cfg, 1, 1);
    CHECK(*r.var_idle == 0.0);
    CHECK(*r.var_nonidle == 0.0);
  }
  SUBCASE("no idle states") {
    std::vector<Episode> moving{episode("m", false, 30, 30)};
    const VarianceReport r = action_variance_report(laplace(0.05), moving, cfg, 4, 1);
    CHECK_FALSE(r.var_idle.has_value());
    CHECK(r.var_nonidle.has_value());
  }
  SUBCASE("more samples converge") {
    const double truth = 2.0 * 0.02 * 0.02;
    const VarianceReport r = action_variance_report(laplace(0.02), eps, cfg, 256, 9);
    CHECK(std::abs(*r.var_nonidle - truth) / truth < 0.25);
  }
  CHECK_THROWS_AS(action_variance_report(laplace(0.1), eps, cfg, 0, 1), UsageError);
}

TEST_CASE("csv reports") {
  const auto p = tmp("empty.csv");
  CHECK(emit_report(p, CsvTable{eval_header(), {}}) == 0);
  CHECK(read_text_file(p) == "arm,n_trials,n_success,rate,ci_lo,ci_hi,idle_failure_fraction,mean_perturbations\n");

  EvalReport r;
  r.n_trials = 10;
  r.n_success = 7;
  r.rate = 0.7;
  CsvTable t{eval_header(), {eval_row("a", r), eval_row("b", r), eval_row("c", r)}};
  const auto q = tmp("three.csv");
  CHECK(emit_report(q, t) == 3);
  const std::string text = read_text_file(q);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  const CsvTable back = read_csv(q);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(std::stod(back.rows[0][3]) == 0.7);

  CHECK(variance_row("x", VarianceReport{})[1] == "NA");
  CHECK_THROWS_AS(emit_report(q, CsvTable{{"a", "b"}, {{"1"}}}), UsageError);
  CHECK_THROWS_AS(emit_report("/nonexistent_dir/x.csv", t), IoError);
}

TEST_CASE("format_real round trips") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal(0.0, 1e3) * std::pow(10.0, rng.normal(0.0, 3.0));
    CHECK(std::stod(format_real(v)) == v);
  }
}
