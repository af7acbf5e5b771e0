#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pauseflow/core.hpp"
#include "pauseflow/nn.hpp"
#include "pauseflow/rng.hpp"

namespace pauseflow {

inline constexpr int kPolicyFormatVersion = 1;

struct PolicyConfig {
  int obs_dim = 3;
  int action_dim = 2;
  int chunk_len = 10;  // K: actions predicted per query
  int open_loop = 4;   // M: actions executed before re-querying
  std::vector<int> hidden_sizes{64, 64};
  double scale_floor = 1e-3;

  int chunk_size() const { return chunk_len * action_dim; }
  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

struct ObsNorm {
  Vec mean;
  Vec std;

  static ObsNorm identity(int dim) { return {Vec(dim, 0.0), Vec(dim, 1.0)}; }
  bool operator==(const ObsNorm&) const = default;
};

/// Chunked Laplace policy. The network maps normalized observations to
/// 2*K*action_dim outputs: means, then raw scales.
struct PolicyParams {
  PolicyConfig config;
  ObsNorm obs_norm;
  nn::Mlp net;
  std::uint64_t rng_seed = 0;

  std::size_t num_params() const { return net.num_params(); }
  bool operator==(const PolicyParams&) const = default;
};

/// Per-entry Laplace parameters, K x action_dim.
struct ChunkDistribution {
  nn::Matrix means;
  nn::Matrix scales;
};

/// A training pair: observation and the next K actions, flattened row-major
/// (entry k * action_dim + a).
struct Sample {
  Vec obs;
  Vec chunk;
};

struct LossGrad {
  double loss = 0.0;
  nn::Vector grad;
};

PolicyParams init_policy(const PolicyConfig& config, std::uint64_t seed);

ChunkDistribution predict_chunk(const PolicyParams& params, std::span<const double> obs);

/// Independent Laplace draws by inverse CDF.
nn::Matrix sample_chunk(const ChunkDistribution& dist, Rng& rng);

/// Sum over entries of log(2b) + |x - mu| / b.
double nll(const ChunkDistribution& dist, const nn::Matrix& actions);

/// Sum over entries of KL(Laplace(ref) || Laplace(dist)).
double laplace_kl(const ChunkDistribution& ref, const ChunkDistribution& dist);

/// Scalar KL between two Laplace distributions.
double laplace_kl(double mu_ref, double b_ref, double mu, double b);

LossGrad bc_loss_and_grad(const PolicyParams& params, std::span<const Sample> batch);

/// Loss = alpha * mean_s nll - (1 - alpha) * mean_f nll + beta * mean KL(ref || params),
/// with the KL averaged over every state in both batches.
LossGrad pmpo_loss_and_grad(const PolicyParams& params, const PolicyParams& ref,
                            std::span<const Sample> batch_s, std::span<const Sample> batch_f,
                            double alpha, double beta);

struct TrainSchedule {
  nn::AdamConfig adam;
  int batch_size = 64;
  int steps = 0;
  std::uint64_t seed = 0;
};

/// Minibatch objective: draws its own batch from `rng` and returns the loss
/// and gradient at `params`.
using Objective = std::function<LossGrad(const PolicyParams&, Rng&)>;

Objective bc_objective(std::span<const Sample> data, int batch_size);
Objective pmpo_objective(std::span<const Sample> accepted, std::span<const Sample> rejected,
                         const PolicyParams& ref, double alpha, double beta, int batch_size);

struct TrainResult {
  PolicyParams params;
  std::vector<double> loss_curve;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Runs schedule.steps Adam updates. Throws TrainingError on a non-finite loss.
TrainResult train(const PolicyParams& params, const Objective& objective,
                  const TrainSchedule& schedule);

/// (obs_t, a_t..a_{t+K-1}) for every step; tails pad with the final action.
std::vector<Sample> make_samples(const Episode& episode, int chunk_len);
Sample make_sample(const Episode& episode, int t, int chunk_len);

/// Per-dimension mean/std; zero-variance dimensions get std 1.
ObsNorm fit_obs_norm(std::span<const Sample> samples);

json policy_to_json(const PolicyParams& params);
PolicyParams policy_from_json(const json& j);
void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

json policy_config_to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const json& j);

}  // namespace pauseflow
