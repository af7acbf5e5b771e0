#include "pauseflow/perturb.hpp"

#include <cmath>

namespace pauseflow {

using nn::Matrix;
using nn::Vector;

void PipConfig::validate() const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw UsageError("pip sigma must be in [0, 1]");
  if (hold_steps < 1) throw UsageError("pip hold_steps must be >= 1");
  if (max_triggers < 0) throw UsageError("pip max_triggers must be >= 0");
}

Vec pip_action(std::span<const double> current, std::span<const double> initial, double sigma) {
  if (current.size() != initial.size()) throw UsageError("pip_action: dimension mismatch");
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw UsageError("pip_action: sigma must be in [0, 1]");
  Vec out(current.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (!std::isfinite(current[i]) || !std::isfinite(initial[i]))
      throw UsageError("pip_action: non-finite joints");
    out[i] = sigma * current[i] + (1.0 - sigma) * initial[i];
  }
  return out;
}

void NoiseConfig::validate() const {
  if (!(explore_prob >= 0.0 && explore_prob <= 1.0))
    throw UsageError("noise explore_prob must be in [0, 1]");
  if (!(std >= 0.0)) throw UsageError("noise std must be >= 0");
}

Matrix noise_action(Matrix chunk, const NoiseConfig& config, Rng& rng) {
  if (!rng.bernoulli(config.explore_prob)) return chunk;
  for (Eigen::Index i = 0; i < chunk.size(); ++i) chunk(i) += rng.normal(0.0, config.std);
  return chunk;
}

void RndConfig::validate() const {
  if (embedding_dim < 1) throw UsageError("rnd embedding_dim must be >= 1");
  if (n_candidates < 1) throw UsageError("rnd n_candidates must be >= 1");
  if (!(learn_rate > 0.0)) throw UsageError("rnd learn_rate must be > 0");
}

namespace {

Matrix rnd_input(std::span<const double> obs, const Matrix& chunk) {
  Matrix x(static_cast<Eigen::Index>(obs.size()) + chunk.size(), 1);
  Eigen::Index i = 0;
  for (double v : obs) x(i++, 0) = v;
  // Row-major flattening, matching Sample::chunk.
  for (Eigen::Index k = 0; k < chunk.rows(); ++k)
    for (Eigen::Index a = 0; a < chunk.cols(); ++a) x(i++, 0) = chunk(k, a);
  return x;
}

}  // namespace

RndState init_rnd(int obs_dim, int chunk_size, std::uint64_t seed, const RndConfig& config) {
  config.validate();
  std::vector<int> sizes{obs_dim + chunk_size};
  sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
  sizes.push_back(config.embedding_dim);
  RndState s;
  s.config = config;
  s.target = nn::Mlp::glorot(sizes, derive_seed(seed, {1}));
  s.predictor = nn::Mlp::glorot(sizes, derive_seed(seed, {2}));
  s.optimizer = nn::Adam(s.predictor.num_params(), {config.learn_rate, 0.9, 0.999, 1e-8});
  return s;
}

double rnd_score(const RndState& state, std::span<const double> obs, const Matrix& chunk) {
  const Matrix x = rnd_input(obs, chunk);
  return (state.predictor.forward(x) - state.target.forward(x)).squaredNorm();
}

void rnd_update(RndState& state, std::span<const double> obs, const Matrix& chunk) {
  const Matrix x = rnd_input(obs, chunk);
  state.episode_buffer.emplace_back(x.data(), x.data() + x.size());
  nn::Mlp::Tape tape;
  const Matrix diff = state.predictor.forward(x, tape) - state.target.forward(x);
  Vector grad = Vector::Zero(state.predictor.num_params());
  state.predictor.backward(tape, 2.0 * diff, grad);
  Vector flat = state.predictor.flatten();
  state.optimizer.step(flat, grad);
  state.predictor.assign(flat);
}

std::size_t argmax_novelty(std::span<const Matrix> candidates, const NoveltyScorer& score) {
  if (candidates.empty()) throw UsageError("no candidates to select from");
  std::size_t best = 0;
  double best_score = score(candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = score(candidates[i]);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

Matrix select_chunk_by_novelty(const ChunkDistribution& dist, const RndState& state,
                               std::span<const double> obs, Rng& rng) {
  std::vector<Matrix> candidates;
  candidates.reserve(state.config.n_candidates);
  for (int i = 0; i < state.config.n_candidates; ++i) candidates.push_back(sample_chunk(dist, rng));
  const auto idx = argmax_novelty(candidates, [&](const Matrix& c) { return rnd_score(state, obs, c); });
  return candidates[idx];
}

Matrix select_chunk_by_novelty(const PolicyParams& policy, const RndState& state,
                               std::span<const double> obs, Rng& rng) {
  return select_chunk_by_novelty(predict_chunk(policy, obs), state, obs, rng);
}

json pip_config_to_json(const PipConfig& c) {
  return {{"sigma", c.sigma}, {"hold_steps", c.hold_steps}, {"max_triggers", c.max_triggers}};
}

PipConfig pip_config_from_json(const json& j) {
  PipConfig c;
  c.sigma = j.value("sigma", c.sigma);
  c.hold_steps = j.value("hold_steps", c.hold_steps);
  c.max_triggers = j.value("max_triggers", c.max_triggers);
  c.validate();
  return c;
}

json noise_config_to_json(const NoiseConfig& c) {
  return {{"explore_prob", c.explore_prob}, {"std", c.std}};
}

NoiseConfig noise_config_from_json(const json& j) {
  NoiseConfig c;
  c.explore_prob = j.value("explore_prob", c.explore_prob);
  c.std = j.value("std", c.std);
  c.validate();
  return c;
}

json rnd_config_to_json(const RndConfig& c) {
  return {{"embedding_dim", c.embedding_dim},
          {"hidden_sizes", c.hidden_sizes},
          {"learn_rate", c.learn_rate},
          {"n_candidates", c.n_candidates}};
}

RndConfig rnd_config_from_json(const json& j) {
  RndConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
  c.learn_rate = j.value("learn_rate", c.learn_rate);
  c.n_candidates = j.value("n_candidates", c.n_candidates);
  c.validate();
  return c;
}

}  // namespace pauseflow
