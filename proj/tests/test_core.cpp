#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "pauseflow/core.hpp"
#include "pauseflow/rng.hpp"

using namespace pauseflow;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "pauseflow_test_core";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Episode make_episode(const std::string& id, int n_steps, Rng& rng) {
  Episode e;
  e.episode_id = id;
  e.env_name = "narrow_gate_v1";
  e.seed = rng.next_u64();
  for (int t = 0; t < n_steps; ++t) {
    e.steps.push_back({t,
                       {rng.uniform(), rng.uniform(), rng.uniform()},
                       {rng.uniform(), rng.uniform()},
                       {rng.normal(), rng.normal() * 1e-7},
                       rng.bernoulli(0.2)});
  }
  e.final_joints = {rng.uniform(), rng.uniform()};
  e.success = rng.bernoulli(0.5);
  return e;
}

}  // namespace

TEST_CASE("validate_episode accepts a well formed episode") {
  Rng rng(1);
  const Episode e = make_episode("ok", 3, rng);
  CHECK(validate_episode(e, {3, 2}).ok);
  CHECK(e.positions().size() == 4);
}

TEST_CASE("validate_episode reports the first violation") {
  Rng rng(2);
  SUBCASE("skipped step index") {
    Episode e = make_episode("gap", 3, rng);
    e.steps[1].t = 2;
    e.steps[2].t = 3;
    const auto v = validate_episode(e, {3, 2});
    CHECK_FALSE(v.ok);
    CHECK(v.message == "non-consecutive indices");
  }
  SUBCASE("non-finite action") {
    Episode e = make_episode("nan", 3, rng);
    e.steps[2].action[0] = std::numeric_limits<double>::quiet_NaN();
    const auto v = validate_episode(e, {3, 2});
    CHECK_FALSE(v.ok);
    CHECK(v.message == "non-finite value");
  }
  SUBCASE("wrong observation length") {
    Episode e = make_episode("dims", 3, rng);
    e.steps[0].obs.pop_back();
    CHECK_FALSE(validate_episode(e, {3, 2}).ok);
  }
  SUBCASE("final joints infinite") {
    Episode e = make_episode("inf", 2, rng);
    e.final_joints[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(validate_episode(e, {3, 2}).ok);
  }
}

TEST_CASE("validation soundness over random corruptions") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Episode e = make_episode("e" + std::to_string(trial), 1 + static_cast<int>(rng.uniform_index(6)), rng);
    REQUIRE(validate_episode(e, {3, 2}).ok);
    const auto t = rng.uniform_index(e.steps.size());
    switch (rng.uniform_index(5)) {
      case 0: e.steps[t].t += 1 + static_cast<int>(rng.uniform_index(3)); break;
      case 1: e.steps[t].joints.push_back(0.0); break;
      case 2: e.steps[t].action.clear(); break;
      case 3: e.steps[t].obs[0] = std::numeric_limits<double>::infinity(); break;
      default: e.final_joints.pop_back(); break;
    }
    CHECK_FALSE(validate_episode(e, {3, 2}).ok);
  }
}

TEST_CASE("validate_dataset rejects duplicate ids") {
  Rng rng(4);
  std::vector<Episode> eps{make_episode("a", 2, rng), make_episode("a", 2, rng)};
  const auto v = validate_dataset(eps, {3, 2});
  CHECK_FALSE(v.ok);
  CHECK(v.message.find("duplicate") != std::string::npos);
}

TEST_CASE("write_episodes and read_episodes") {
  Rng rng(5);
  SUBCASE("empty dataset gives an empty file") {
    const auto path = temp_file("empty.jsonl");
    CHECK(write_episodes(path, std::vector<Episode>{}) == 0);
    CHECK(std::filesystem::file_size(path) == 0);
    CHECK(read_episodes(path).empty());
  }
  SUBCASE("five episodes give five lines") {
    std::vector<Episode> eps;
    for (int i = 0; i < 5; ++i) eps.push_back(make_episode("ep" + std::to_string(i), 4, rng));
    const auto path = temp_file("five.jsonl");
    CHECK(write_episodes(path, eps) == 5);
    std::ifstream in(path);
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 5);
  }
  SUBCASE("truncated line reports its line number") {
    std::vector<Episode> eps{make_episode("x", 3, rng), make_episode("y", 3, rng)};
    const auto path = temp_file("trunc.jsonl");
    write_episodes(path, eps);
    std::string text = read_text_file(path);
    text.resize(text.size() - 20);
    write_text_file(path, text);
    try {
      read_episodes(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("invalid episode aborts the write with its id") {
    std::vector<Episode> eps{make_episode("good", 3, rng), make_episode("bad", 3, rng)};
    eps[1].steps[0].t = 7;
    try {
      write_episodes(temp_file("bad.jsonl"), eps);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.episode_id() == "bad");
    }
  }
  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(read_episodes(temp_file("does_not_exist.jsonl")), IoError);
  }
}

TEST_CASE("round trip reproduces every field exactly") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Episode> eps;
    const int n = 1 + static_cast<int>(rng.uniform_index(5));
    for (int i = 0; i < n; ++i)
      eps.push_back(make_episode("r" + std::to_string(i), static_cast<int>(rng.uniform_index(30)), rng));
    const auto path = temp_file("roundtrip.jsonl");
    write_episodes(path, eps);
    const auto back = read_episodes(path);
    REQUIRE(back.size() == eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) CHECK(back[i] == eps[i]);
  }
}

TEST_CASE("derive_seed depends on parent and path order") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}

TEST_CASE("rng variates are in range and reproducible") {
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
    CHECK(a.uniform_index(7) < 7);
    b.uniform_index(7);
  }
}

TEST_CASE("idle config validation") {
  CHECK_NOTHROW(IdleConfig{}.validate());
  CHECK_THROWS_AS((IdleConfig{0.0, 8, 1}.validate()), UsageError);
  CHECK_THROWS_AS((IdleConfig{0.01, 0, 1}.validate()), UsageError);
  CHECK_THROWS_AS((IdleConfig{0.01, 8, 0}.validate()), UsageError);
}
