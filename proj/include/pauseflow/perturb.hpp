#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pauseflow/core.hpp"
#include "pauseflow/nn.hpp"
#include "pauseflow/policy.hpp"
#include "pauseflow/rng.hpp"

namespace pauseflow {

struct PipConfig {
  double sigma = 0.6;
  int hold_steps = 4;
  int max_triggers = 10;

  void validate() const;
};

/// sigma * current + (1 - sigma) * initial, elementwise.
Vec pip_action(std::span<const double> current_joints, std::span<const double> initial_joints,
               double sigma);

struct NoiseConfig {
  double explore_prob = 0.1;
  double std = 0.02;

  void validate() const;
};

/// With probability explore_prob, adds N(0, std^2) to every entry of the chunk.
/// One Bernoulli draw per call.
nn::Matrix noise_action(nn::Matrix chunk, const NoiseConfig& config, Rng& rng);

struct RndConfig {
  int embedding_dim = 16;
  std::vector<int> hidden_sizes{32, 32};
  double learn_rate = 1e-3;
  int n_candidates = 8;

  void validate() const;
};

/// Random network distillation over (observation, flattened chunk) inputs.
/// The target network is fixed at init; the predictor trains online and the
/// buffer holds this episode's pairs.
struct RndState {
  RndConfig config;
  nn::Mlp target;
  nn::Mlp predictor;
  std::vector<Vec> episode_buffer;
  nn::Adam optimizer{0, {}};
};

RndState init_rnd(int obs_dim, int chunk_size, std::uint64_t seed, const RndConfig& config = {});

double rnd_score(const RndState& state, std::span<const double> obs, const nn::Matrix& chunk);

/// Appends the pair to the buffer and takes one predictor step toward the target.
void rnd_update(RndState& state, std::span<const double> obs, const nn::Matrix& chunk);

using NoveltyScorer = std::function<double(const nn::Matrix& chunk)>;

/// Index of the highest score; ties go to the lowest index.
std::size_t argmax_novelty(std::span<const nn::Matrix> candidates, const NoveltyScorer& score);

/// Samples n_candidates chunks from `dist` and returns the most novel one.
nn::Matrix select_chunk_by_novelty(const ChunkDistribution& dist, const RndState& state,
                                   std::span<const double> obs, Rng& rng);

nn::Matrix select_chunk_by_novelty(const PolicyParams& policy, const RndState& state,
                                   std::span<const double> obs, Rng& rng);

json pip_config_to_json(const PipConfig& c);
PipConfig pip_config_from_json(const json& j);
json noise_config_to_json(const NoiseConfig& c);
NoiseConfig noise_config_from_json(const json& j);
json rnd_config_to_json(const RndConfig& c);
RndConfig rnd_config_from_json(const json& j);

}  // namespace pauseflow
