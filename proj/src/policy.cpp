#include "pauseflow/policy.hpp"

#include <algorithm>
#include <cmath>

namespace pauseflow {

using nn::Matrix;
using nn::Vector;

void PolicyConfig::validate() const {
  if (obs_dim < 1 || action_dim < 1) throw UsageError("policy dims must be positive");
  if (chunk_len < 1) throw UsageError("chunk_len must be >= 1");
  if (open_loop < 1 || open_loop > chunk_len) throw UsageError("open_loop must be in [1, chunk_len]");
  if (!(scale_floor > 0.0)) throw UsageError("scale_floor must be > 0");
  for (int h : hidden_sizes)
    if (h < 1) throw UsageError("hidden sizes must be positive");
}

PolicyParams init_policy(const PolicyConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<int> sizes{config.obs_dim};
  sizes.insert(sizes.end(), config.hidden_sizes.begin(), config.hidden_sizes.end());
  sizes.push_back(2 * config.chunk_size());
  return {config, ObsNorm::identity(config.obs_dim), nn::Mlp::glorot(sizes, seed), seed};
}

namespace {

Matrix normalized_batch(const PolicyParams& p, std::span<const Sample> batch) {
  const int d = p.config.obs_dim;
  Matrix x(d, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (batch[j].obs.size() != static_cast<std::size_t>(d)) throw UsageError("obs length mismatch");
    for (int i = 0; i < d; ++i) x(i, j) = (batch[j].obs[i] - p.obs_norm.mean[i]) / p.obs_norm.std[i];
  }
  return x;
}

// Column j of the network output -> distribution for sample j.
ChunkDistribution column_distribution(const PolicyConfig& c, const Matrix& out, Eigen::Index j) {
  const int n = c.chunk_size();
  ChunkDistribution d{Matrix(c.chunk_len, c.action_dim), Matrix(c.chunk_len, c.action_dim)};
  for (int e = 0; e < n; ++e) {
    const int k = e / c.action_dim, a = e % c.action_dim;
    d.means(k, a) = out(e, j);
    d.scales(k, a) = nn::softplus(out(n + e, j)) + c.scale_floor;
  }
  return d;
}

// Per-entry nll and its partial derivatives w.r.t. mean and raw scale.
struct EntryNll {
  double value, d_mu, d_raw;
};

EntryNll entry_nll(double x, double mu, double raw, double floor) {
  const double b = nn::softplus(raw) + floor;
  const double r = x - mu;
  const double ar = std::abs(r);
  const double sgn = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
  const double d_b = 1.0 / b - ar / (b * b);
  return {std::log(2.0 * b) + ar / b, -sgn / b, d_b * nn::sigmoid(raw)};
}

struct EntryKl {
  double value, d_mu, d_raw;
};

EntryKl entry_kl(double mu_ref, double b_ref, double mu, double raw, double floor) {
  const double b = nn::softplus(raw) + floor;
  const double delta = mu_ref - mu;
  const double a = std::abs(delta);
  const double sgn = delta > 0 ? 1.0 : (delta < 0 ? -1.0 : 0.0);
  const double ex = std::exp(-a / b_ref);
  const double value = std::log(b / b_ref) + a / b + (b_ref / b) * ex - 1.0;
  const double d_mu = -sgn * (1.0 - ex) / b;
  const double d_b = 1.0 / b - a / (b * b) - (b_ref / (b * b)) * ex;
  return {value, d_mu, d_b * nn::sigmoid(raw)};
}

void check_sample(const PolicyConfig& c, const Sample& s) {
  if (s.chunk.size() != static_cast<std::size_t>(c.chunk_size()))
    throw UsageError("action chunk length mismatch");
}

}  // namespace

ChunkDistribution predict_chunk(const PolicyParams& params, std::span<const double> obs) {
  if (obs.size() != static_cast<std::size_t>(params.config.obs_dim))
    throw UsageError("obs length mismatch");
  for (double v : obs)
    if (!std::isfinite(v)) throw UsageError("non-finite observation");
  Sample s{Vec(obs.begin(), obs.end()), {}};
  const Matrix out = params.net.forward(normalized_batch(params, std::span<const Sample>(&s, 1)));
  return column_distribution(params.config, out, 0);
}

Matrix sample_chunk(const ChunkDistribution& dist, Rng& rng) {
  Matrix x(dist.means.rows(), dist.means.cols());
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    for (Eigen::Index a = 0; a < x.cols(); ++a) {
      double u;
      do {
        u = rng.uniform() - 0.5;
      } while (u == -0.5);
      const double sgn = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
      x(k, a) = dist.means(k, a) - dist.scales(k, a) * sgn * std::log1p(-2.0 * std::abs(u));
    }
  }
  return x;
}

double nll(const ChunkDistribution& dist, const Matrix& actions) {
  if (actions.rows() != dist.means.rows() || actions.cols() != dist.means.cols())
    throw UsageError("action chunk shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < actions.size(); ++i) {
    const double b = dist.scales(i);
    total += std::log(2.0 * b) + std::abs(actions(i) - dist.means(i)) / b;
  }
  return total;
}

double laplace_kl(double mu_ref, double b_ref, double mu, double b) {
  const double a = std::abs(mu_ref - mu);
  return std::log(b / b_ref) + a / b + (b_ref / b) * std::exp(-a / b_ref) - 1.0;
}

double laplace_kl(const ChunkDistribution& ref, const ChunkDistribution& dist) {
  if (ref.means.rows() != dist.means.rows() || ref.means.cols() != dist.means.cols())
    throw UsageError("distribution shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < ref.means.size(); ++i)
    total += laplace_kl(ref.means(i), ref.scales(i), dist.means(i), dist.scales(i));
  return total;
}

LossGrad bc_loss_and_grad(const PolicyParams& params, std::span<const Sample> batch) {
  return pmpo_loss_and_grad(params, params, batch, {}, 1.0, 0.0);
}

LossGrad pmpo_loss_and_grad(const PolicyParams& params, const PolicyParams& ref,
                            std::span<const Sample> batch_s, std::span<const Sample> batch_f,
                            double alpha, double beta) {
  if (batch_s.empty()) throw UsageError("empty accepted batch");
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("alpha must be in [0, 1]");
  if (beta < 0.0) throw UsageError("beta must be >= 0");
  const PolicyConfig& c = params.config;
  const int n = c.chunk_size();
  const Eigen::Index ns = static_cast<Eigen::Index>(batch_s.size());
  const Eigen::Index nf = static_cast<Eigen::Index>(batch_f.size());
  const Eigen::Index total = ns + nf;

  std::vector<Sample> all(batch_s.begin(), batch_s.end());
  all.insert(all.end(), batch_f.begin(), batch_f.end());
  for (const auto& s : all) check_sample(c, s);

  nn::Mlp::Tape tape;
  const Matrix out = params.net.forward(normalized_batch(params, all), tape);
  Matrix ref_out;
  if (beta > 0.0) ref_out = ref.net.forward(normalized_batch(ref, all));

  Matrix d_out = Matrix::Zero(out.rows(), out.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < total; ++j) {
    const bool accepted = j < ns;
    const double w = accepted ? alpha / static_cast<double>(ns)
                              : -(1.0 - alpha) / static_cast<double>(nf);
    const Vec& x = all[j].chunk;
    if (w != 0.0) {
      for (int e = 0; e < n; ++e) {
        const EntryNll t = entry_nll(x[e], out(e, j), out(n + e, j), c.scale_floor);
        loss += w * t.value;
        d_out(e, j) += w * t.d_mu;
        d_out(n + e, j) += w * t.d_raw;
      }
    }
    if (beta > 0.0) {
      const double wk = beta / static_cast<double>(total);
      for (int e = 0; e < n; ++e) {
        const double b_ref = nn::softplus(ref_out(n + e, j)) + ref.config.scale_floor;
        const EntryKl t = entry_kl(ref_out(e, j), b_ref, out(e, j), out(n + e, j), c.scale_floor);
        loss += wk * t.value;
        d_out(e, j) += wk * t.d_mu;
        d_out(n + e, j) += wk * t.d_raw;
      }
    }
  }

  LossGrad r{loss, Vector::Zero(params.num_params())};
  params.net.backward(tape, d_out, r.grad);
  return r;
}

namespace {

std::vector<Sample> draw_batch(std::span<const Sample> data, int batch_size, Rng& rng) {
  std::vector<Sample> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) batch.push_back(data[rng.uniform_index(data.size())]);
  return batch;
}

}  // namespace

Objective bc_objective(std::span<const Sample> data, int batch_size) {
  if (data.empty()) throw UsageError("empty training set");
  return [data, batch_size](const PolicyParams& p, Rng& rng) {
    return bc_loss_and_grad(p, draw_batch(data, batch_size, rng));
  };
}

Objective pmpo_objective(std::span<const Sample> accepted, std::span<const Sample> rejected,
                         const PolicyParams& ref, double alpha, double beta, int batch_size) {
  if (accepted.empty()) throw UsageError("empty accepted set");
  return [accepted, rejected, ref, alpha, beta, batch_size](const PolicyParams& p, Rng& rng) {
    const auto bs = draw_batch(accepted, batch_size, rng);
    std::vector<Sample> bf;
    if (!rejected.empty()) bf = draw_batch(rejected, batch_size, rng);
    return pmpo_loss_and_grad(p, ref, bs, bf, alpha, beta);
  };
}

TrainResult train(const PolicyParams& params, const Objective& objective,
                  const TrainSchedule& schedule) {
  if (schedule.steps < 0) throw UsageError("steps must be >= 0");
  if (schedule.batch_size < 1) throw UsageError("batch_size must be >= 1");
  TrainResult r{params, {}};
  r.loss_curve.reserve(schedule.steps);
  Rng rng(derive_seed(schedule.seed, {0x7a1}));
  nn::Adam adam(params.num_params(), schedule.adam);
  Vector flat = r.params.net.flatten();
  for (int s = 0; s < schedule.steps; ++s) {
    LossGrad lg = objective(r.params, rng);
    if (!std::isfinite(lg.loss) || !lg.grad.allFinite())
      throw TrainingError("non-finite loss at step " + std::to_string(s), s);
    r.loss_curve.push_back(lg.loss);
    adam.step(flat, lg.grad);
    r.params.net.assign(flat);
  }
  return r;
}

Sample make_sample(const Episode& episode, int t, int chunk_len) {
  const int T = static_cast<int>(episode.steps.size());
  if (t < 0 || t >= T) throw UsageError("sample index out of range");
  Sample s;
  s.obs = episode.steps[t].obs;
  const std::size_t a = episode.steps[t].action.size();
  s.chunk.reserve(chunk_len * a);
  for (int k = 0; k < chunk_len; ++k) {
    const auto& act = episode.steps[std::min(t + k, T - 1)].action;
    s.chunk.insert(s.chunk.end(), act.begin(), act.end());
  }
  return s;
}

std::vector<Sample> make_samples(const Episode& episode, int chunk_len) {
  std::vector<Sample> out;
  out.reserve(episode.steps.size());
  for (int t = 0; t < static_cast<int>(episode.steps.size()); ++t)
    out.push_back(make_sample(episode, t, chunk_len));
  return out;
}

ObsNorm fit_obs_norm(std::span<const Sample> samples) {
  if (samples.empty()) throw UsageError("cannot fit normalization on an empty set");
  const std::size_t d = samples.front().obs.size();
  ObsNorm n{Vec(d, 0.0), Vec(d, 0.0)};
  for (const auto& s : samples)
    for (std::size_t i = 0; i < d; ++i) n.mean[i] += s.obs[i];
  for (auto& m : n.mean) m /= static_cast<double>(samples.size());
  for (const auto& s : samples)
    for (std::size_t i = 0; i < d; ++i) n.std[i] += (s.obs[i] - n.mean[i]) * (s.obs[i] - n.mean[i]);
  for (auto& v : n.std) {
    v = std::sqrt(v / static_cast<double>(samples.size()));
    if (v < 1e-8) v = 1.0;
  }
  return n;
}

json policy_config_to_json(const PolicyConfig& c) {
  return {{"obs_dim", c.obs_dim},         {"action_dim", c.action_dim},
          {"chunk_len", c.chunk_len},     {"open_loop", c.open_loop},
          {"hidden_sizes", c.hidden_sizes}, {"activation", "tanh"},
          {"scale_floor", c.scale_floor}};
}

PolicyConfig policy_config_from_json(const json& j) {
  PolicyConfig c;
  c.obs_dim = j.value("obs_dim", c.obs_dim);
  c.action_dim = j.value("action_dim", c.action_dim);
  c.chunk_len = j.value("chunk_len", c.chunk_len);
  c.open_loop = j.value("open_loop", c.open_loop);
  c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
  c.scale_floor = j.value("scale_floor", c.scale_floor);
  if (j.value("activation", std::string("tanh")) != "tanh")
    throw UsageError("only tanh activation is supported");
  c.validate();
  return c;
}

json policy_to_json(const PolicyParams& p) {
  return {{"format_version", kPolicyFormatVersion},
          {"config", policy_config_to_json(p.config)},
          {"obs_norm", {{"mean", p.obs_norm.mean}, {"std", p.obs_norm.std}}},
          {"rng_seed", p.rng_seed},
          {"layers", nn::layers_to_json(p.net.layers())}};
}

PolicyParams policy_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kPolicyFormatVersion)
    throw Error("unsupported policy format_version " + std::to_string(version));
  PolicyParams p;
  p.config = policy_config_from_json(j.at("config"));
  p.obs_norm.mean = j.at("obs_norm").at("mean").get<Vec>();
  p.obs_norm.std = j.at("obs_norm").at("std").get<Vec>();
  p.rng_seed = j.value("rng_seed", std::uint64_t{0});
  p.net = nn::Mlp(nn::layers_from_json(j.at("layers")));
  const auto d = static_cast<std::size_t>(p.config.obs_dim);
  if (p.obs_norm.mean.size() != d || p.obs_norm.std.size() != d)
    throw Error("obs_norm length does not match obs_dim");
  if (p.net.input_dim() != p.config.obs_dim || p.net.output_dim() != 2 * p.config.chunk_size())
    throw Error("network shape does not match config");
  return p;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
  write_text_file(path, policy_to_json(params).dump(1) + "\n");
}

PolicyParams load_policy(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
    return policy_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy file '") + path.string() + "': " + e.what(), 1);
  }
}

}  // namespace pauseflow
