#include <doctest.h>

#include <cmath>

#include "pauseflow/perturb.hpp"

using namespace pauseflow;
using nn::Matrix;

TEST_CASE("pip_action endpoints and worked value") {
  const Vec cur{0.8, 0.9}, init{0.1, 0.1};
  CHECK(pip_action(cur, init, 1.0) == cur);
  CHECK(pip_action(cur, init, 0.0) == init);
  const Vec a = pip_action(cur, init, 0.6);
  CHECK(a[0] == doctest::Approx(0.52).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(0.58).epsilon(1e-14));
}

TEST_CASE("pip_action betweenness and linearity") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec c{rng.uniform(), rng.uniform()}, s0{rng.uniform(), rng.uniform()};
    const double s1 = rng.uniform(), s2 = rng.uniform();
    const Vec a = pip_action(c, s0, s1);
    const Vec b = pip_action(c, s0, s2);
    const Vec m = pip_action(c, s0, 0.5 * (s1 + s2));
    for (int k = 0; k < 2; ++k) {
      CHECK(a[k] >= std::min(c[k], s0[k]) - 1e-15);
      CHECK(a[k] <= std::max(c[k], s0[k]) + 1e-15);
      CHECK(std::abs(a[k] + b[k] - 2.0 * m[k]) < 1e-12);
    }
  }
}

TEST_CASE("pip_action argument checks") {
  CHECK_THROWS_AS(pip_action(Vec{0.1, 0.2}, Vec{0.1}, 0.5), UsageError);
  CHECK_THROWS_AS(pip_action(Vec{0.1}, Vec{0.1}, 1.5), UsageError);
  CHECK_THROWS_AS(pip_action(Vec{NAN}, Vec{0.1}, 0.5), UsageError);
  CHECK_THROWS_AS((PipConfig{0.6, 0, 10}.validate()), UsageError);
  CHECK_THROWS_AS((PipConfig{0.6, 4, -1}.validate()), UsageError);
}

TEST_CASE("noise_action") {
  const Matrix chunk = Matrix::Random(10, 2);
  Rng rng(2);
  SUBCASE("never exploring is the identity") {
    for (int i = 0; i < 100; ++i) CHECK(noise_action(chunk, {0.0, 0.5}, rng) == chunk);
  }
  SUBCASE("zero std is the identity") { CHECK(noise_action(chunk, {1.0, 0.0}, rng) == chunk); }
  SUBCASE("per-entry standard deviation") {
    const int n = 100000;
    double sq = 0.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const Matrix out = noise_action(Matrix::Zero(1, 1), {1.0, 0.02}, rng);
      sum += out(0, 0);
      sq += out(0, 0) * out(0, 0);
    }
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    CHECK(std::abs(sd - 0.02) < 0.05 * 0.02);
  }
  SUBCASE("one draw per chunk") {
    int changed = 0;
    for (int i = 0; i < 2000; ++i) {
      const Matrix out = noise_action(chunk, {0.1, 0.02}, rng);
      CHECK(out.allFinite());
      CHECK(out.rows() == chunk.rows());
      const bool any = out != chunk;
      // All entries move together or none do.
      if (any) CHECK((out - chunk).cwiseAbs().minCoeff() > 0.0);
      changed += any;
    }
    CHECK(std::abs(changed / 2000.0 - 0.1) < 0.03);
  }
}

TEST_CASE("rnd scores") {
  const RndState s = init_rnd(3, 20, 7);
  const Vec obs{0.1, 0.2, 0.3};
  const Matrix chunk = Matrix::Constant(10, 2, 0.4);
  const double a = rnd_score(s, obs, chunk);
  CHECK(a >= 0.0);
  CHECK(rnd_score(s, obs, chunk) == a);
  const RndState t = init_rnd(3, 20, 7);
  CHECK(rnd_score(t, obs, chunk) == a);
  CHECK(init_rnd(3, 20, 8).target.flatten() != s.target.flatten());
}

TEST_CASE("rnd_update trains the predictor only") {
  RndState s = init_rnd(3, 20, 9);
  const Vec obs{0.5, 0.1, 0.4};
  const Matrix chunk = Matrix::Constant(10, 2, 0.3);
  const nn::Vector target_before = s.target.flatten();
  const double before = rnd_score(s, obs, chunk);
  rnd_update(s, obs, chunk);
  CHECK(s.episode_buffer.size() == 1);
  CHECK(s.target.flatten() == target_before);
  for (int i = 1; i < 500; ++i) rnd_update(s, obs, chunk);
  CHECK(s.episode_buffer.size() == 500);
  CHECK(rnd_score(s, obs, chunk) < before);
}

TEST_CASE("rnd score on the trained pair does not rise on average") {
  double rises = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RndState s = init_rnd(3, 4, seed);
    Rng rng(seed);
    const Vec obs{rng.uniform(), rng.uniform(), rng.uniform()};
    const Matrix chunk = Matrix::Random(2, 2);
    const double before = rnd_score(s, obs, chunk);
    rnd_update(s, obs, chunk);
    rises += rnd_score(s, obs, chunk) - before;
  }
  CHECK(rises <= 0.0);
}

TEST_CASE("argmax_novelty") {
  std::vector<Matrix> c{Matrix::Constant(1, 1, 0.0), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)};
  const double scores[] = {0.1, 0.9, 0.3};
  CHECK(argmax_novelty(c, [&](const Matrix& m) { return scores[static_cast<int>(m(0, 0))]; }) == 1);
  CHECK(argmax_novelty(c, [](const Matrix&) { return 1.0; }) == 0);
  CHECK_THROWS_AS(argmax_novelty(std::vector<Matrix>{}, [](const Matrix&) { return 0.0; }), UsageError);
}

TEST_CASE("select_chunk_by_novelty") {
  ChunkDistribution d{Matrix::Constant(10, 2, 0.5), Matrix::Constant(10, 2, 0.1)};
  const Vec obs{0.5, 0.2, 0.5};
  SUBCASE("single candidate returns that sample") {
    RndConfig c;
    c.n_candidates = 1;
    const RndState s = init_rnd(3, 20, 1, c);
    Rng a(4), b(4);
    CHECK(select_chunk_by_novelty(d, s, obs, a) == sample_chunk(d, b));
  }
  SUBCASE("returns the most novel of the drawn candidates") {
    const RndState s = init_rnd(3, 20, 1);
    Rng a(5), b(5);
    const Matrix chosen = select_chunk_by_novelty(d, s, obs, a);
    double best = -1.0;
    Matrix expected;
    for (int i = 0; i < s.config.n_candidates; ++i) {
      const Matrix m = sample_chunk(d, b);
      const double score = rnd_score(s, obs, m);
      if (score > best) best = score, expected = m;
    }
    CHECK(chosen == expected);
  }
}

TEST_CASE("perturbation config json") {
  PipConfig p{0.8, 6, 3};
  const PipConfig q = pip_config_from_json(pip_config_to_json(p));
  CHECK(q.sigma == 0.8);
  CHECK(q.hold_steps == 6);
  CHECK(q.max_triggers == 3);
  CHECK(noise_config_from_json(noise_config_to_json({0.3, 0.05})).std == 0.05);
  CHECK(rnd_config_from_json(rnd_config_to_json(RndConfig{})).n_candidates == 8);
}
