#include "pauseflow/flywheel.hpp"

#include <exception>
#include <mutex>
#include <thread>

namespace pauseflow {

using nn::Matrix;

std::string to_string(PerturbMode m) {
  switch (m) {
    case PerturbMode::None: return "none";
    case PerturbMode::Pip: return "pip";
    case PerturbMode::Noise: return "noise";
    case PerturbMode::Rnd: return "rnd";
  }
  return "none";
}

PerturbMode parse_perturb_mode(const std::string& s) {
  if (s == "none") return PerturbMode::None;
  if (s == "pip") return PerturbMode::Pip;
  if (s == "noise") return PerturbMode::Noise;
  if (s == "rnd") return PerturbMode::Rnd;
  throw UsageError("unknown perturbation mode '" + s + "' (expected none|pip|noise|rnd)");
}

std::string to_string(ImproveMode m) { return m == ImproveMode::Pmpo ? "pmpo" : "bc-success"; }

ImproveMode parse_improve_mode(const std::string& s) {
  if (s == "pmpo") return ImproveMode::Pmpo;
  if (s == "bc-success") return ImproveMode::BcSuccess;
  throw UsageError("unknown improve mode '" + s + "' (expected bc-success|pmpo)");
}

void RolloutConfig::validate() const {
  idle.validate();
  pip.validate();
  noise.validate();
  rnd.validate();
}

ChunkPolicy ChunkPolicy::from_params(const PolicyParams& params) {
  return {[&params](std::span<const double> obs) { return predict_chunk(params, obs); },
          params.config.obs_dim, params.config.chunk_len, params.config.open_loop,
          params.config.action_dim};
}

Episode rollout(const ChunkPolicy& policy, const NarrowGateConfig& env,
                const RolloutConfig& config, std::string episode_id) {
  config.validate();
  if (policy.open_loop < 1 || policy.open_loop > policy.chunk_len)
    throw UsageError("open_loop must be in [1, chunk_len]");
  auto [state, obs] = reset(env, config.episode_seed);
  Rng action_rng(derive_seed(config.episode_seed, {0xac7}));
  Rng noise_rng(derive_seed(config.episode_seed, {0x401}));
  std::optional<RndState> rnd;
  if (config.mode == PerturbMode::Rnd)
    rnd = init_rnd(policy.obs_dim, policy.chunk_len * policy.action_dim, config.rnd_seed, config.rnd);

  const bool detect = config.mode == PerturbMode::Pip;
  const int cooldown = config.effective_cooldown();
  DetectorState detector;
  detector = streaming_update(std::move(detector), state.agent, config.idle, cooldown).first;

  Episode ep;
  ep.episode_id = std::move(episode_id);
  ep.env_name = kNarrowGateName;
  ep.seed = config.episode_seed;
  bool done = false;
  int triggers = 0;

  auto advance = [&](const Vec& action, bool perturbed) {
    ep.steps.push_back({state.step_count, obs, {state.agent[0], state.agent[1]}, action, perturbed});
    const StepResult r = step(env, state, action);
    state = r.state;
    obs = r.obs;
    done = r.done;
    ep.success = r.success;
  };
  // Feeds the current position to the detector; true when a perturbation should start.
  auto observe_motion = [&]() {
    auto [next, fired] = streaming_update(std::move(detector), state.agent, config.idle, cooldown);
    detector = std::move(next);
    return fired;
  };

  while (!done) {
    const ChunkDistribution dist = policy.distribution(obs);
    Matrix chunk;
    if (rnd) {
      chunk = select_chunk_by_novelty(dist, *rnd, obs, action_rng);
      rnd_update(*rnd, obs, chunk);
    } else {
      chunk = config.deterministic_actions ? dist.means : sample_chunk(dist, action_rng);
    }
    if (config.mode == PerturbMode::Noise) chunk = noise_action(std::move(chunk), config.noise, noise_rng);

    for (int j = 0; j < policy.open_loop && !done; ++j) {
      Vec action(chunk.cols());
      for (Eigen::Index a = 0; a < chunk.cols(); ++a) action[a] = chunk(j, a);
      advance(action, false);
      if (!detect || done) continue;
      if (!observe_motion() || triggers >= config.pip.max_triggers) continue;
      ++triggers;
      const Vec target = pip_action(state.agent, state.initial_joints, config.pip.sigma);
      for (int h = 0; h < config.pip.hold_steps && !done; ++h) {
        advance(target, true);
        if (!done) observe_motion();
      }
      break;  // re-query the policy after a perturbation
    }
  }
  ep.final_joints = {state.agent[0], state.agent[1]};
  return ep;
}

Episode rollout(const PolicyParams& policy, const NarrowGateConfig& env,
                const RolloutConfig& config, std::string episode_id) {
  return rollout(ChunkPolicy::from_params(policy), env, config, std::move(episode_id));
}

Dataset collect(const ChunkPolicy& policy, const NarrowGateConfig& env, int n,
                std::uint64_t master_seed, const RolloutConfig& config, int jobs,
                const std::string& provenance, const std::string& id_prefix) {
  if (n < 1) throw UsageError("collect needs n >= 1");
  config.validate();
  Dataset ds;
  ds.provenance = provenance;
  ds.episodes.resize(n);
  auto run_one = [&](int i) {
    RolloutConfig c = config;
    c.episode_seed = derive_seed(master_seed, {static_cast<std::uint64_t>(i)});
    ds.episodes[i] = rollout(policy, env, c, id_prefix + "-" + std::to_string(i));
  };
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) run_one(i);
    return ds;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += jobs) run_one(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return ds;
}

Dataset collect(const PolicyParams& policy, const NarrowGateConfig& env, int n,
                std::uint64_t master_seed, const RolloutConfig& config, int jobs,
                const std::string& provenance, const std::string& id_prefix) {
  return collect(ChunkPolicy::from_params(policy), env, n, master_seed, config, jobs, provenance,
                 id_prefix);
}

namespace {

void append_samples(std::vector<Sample>& out, const Episode& e, int chunk_len) {
  auto s = make_samples(e, chunk_len);
  out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
}

}  // namespace

ImproveResult improve(const PolicyParams& policy, std::span<const Episode> expert,
                      std::span<const Episode> rollouts, const ImproveConfig& config) {
  const int K = policy.config.chunk_len;
  std::vector<Sample> accepted;
  for (const auto& e : expert) append_samples(accepted, e, K);

  ImproveResult r;
  if (config.mode == ImproveMode::BcSuccess) {
    for (const auto& e : rollouts)
      if (e.success) append_samples(accepted, e, K);
    if (accepted.empty()) throw UsageError("improve: accepted set is empty");
    r.n_accepted = accepted.size();
    r.trained = train(policy, bc_objective(accepted, config.schedule.batch_size), config.schedule);
    return r;
  }

  LabelOptions labels = config.labels;
  labels.chunk_len = K;
  const PreferenceDataset prefs = label_preferences(rollouts, labels);
  for (const auto& k : prefs.accepted) accepted.push_back(k.sample);
  const std::vector<Sample> rejected = prefs.rejected_samples();
  if (accepted.empty()) throw UsageError("improve: accepted set is empty");
  r.n_accepted = accepted.size();
  r.n_rejected = rejected.size();
  r.trained = train(policy,
                    pmpo_objective(accepted, rejected, policy, config.alpha, config.beta,
                                   config.schedule.batch_size),
                    config.schedule);
  return r;
}

void RoundConfig::validate() const {
  if (rounds < 1) throw UsageError("rounds must be >= 1");
  if (rollouts_per_round < 1) throw UsageError("rollouts_per_round must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must be in [0, 1]");
  if (!(beta >= 0.0)) throw UsageError("beta must be >= 0");
  if (finetune_steps < 0) throw UsageError("finetune_steps must be >= 0");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (eval_episodes < 1) throw UsageError("eval_episodes must be >= 1");
  collect.validate();
}

std::uint64_t eval_seed(std::uint64_t master_seed) { return derive_seed(master_seed, {0xe7a1}); }

EvalReport evaluate_policy(const PolicyParams& policy, const NarrowGateConfig& env, int n,
                           std::uint64_t master_seed, RolloutConfig config, int jobs) {
  const Dataset ds = collect(policy, env, n, eval_seed(master_seed), config, jobs, "eval", "eval");
  return evaluate_episodes(ds.episodes, config.idle);
}

std::vector<RoundRecord> run_rounds(const PolicyParams& initial_policy,
                                    std::span<const Episode> expert, const NarrowGateConfig& env,
                                    const RoundConfig& config, std::uint64_t master_seed,
                                    const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  std::vector<RoundRecord> records;
  PolicyParams policy = initial_policy;
  for (int k = 1; k <= config.rounds; ++k) {
    const auto round = static_cast<std::uint64_t>(k);
    Dataset rollouts = collect(policy, env, config.rollouts_per_round,
                               derive_seed(master_seed, {round, 1}), config.collect, config.jobs,
                               round_provenance(k), "r" + std::to_string(k));

    ImproveConfig ic;
    ic.mode = config.improve_mode;
    ic.alpha = config.alpha;
    ic.beta = config.beta;
    ic.schedule = {config.adam, config.batch_size, config.finetune_steps,
                   derive_seed(master_seed, {round, 2})};
    ic.labels.idle = config.collect.idle;
    ic.labels.window = config.window;
    const ImproveResult improved = improve(policy, expert, rollouts.episodes, ic);
    policy = improved.trained.params;

    RolloutConfig ec = config.collect;
    ec.mode = config.eval_mode;
    ec.deterministic_actions = true;  // collection samples, evaluation does not
    RoundMetrics m;
    m.round = k;
    m.collected = static_cast<int>(rollouts.episodes.size());
    for (const auto& e : rollouts.episodes) m.collected_success += e.success ? 1 : 0;
    m.n_accepted = improved.n_accepted;
    m.n_rejected = improved.n_rejected;
    m.eval = evaluate_policy(policy, env, config.eval_episodes, master_seed, ec, config.jobs);

    if (out_dir) {
      const auto dir = *out_dir / ("round_" + std::to_string(k));
      std::filesystem::create_directories(dir);
      write_episodes(dir / "rollouts.jsonl", rollouts.episodes);
      save_policy(dir / "policy.json", policy);
      emit_report(dir / "metrics.csv",
                  {round_metrics_header(), {round_metrics_row(m, to_string(config.improve_mode))}});
    }
    records.push_back({policy, std::move(rollouts), m});
  }
  return records;
}

const std::vector<std::string>& round_metrics_header() {
  static const std::vector<std::string> h{
      "arm",       "round",    "collected", "collected_success", "n_accepted", "n_rejected",
      "n_trials",  "n_success", "rate",     "ci_lo",             "ci_hi",      "idle_failure_fraction",
      "mean_perturbations"};
  return h;
}

std::vector<std::string> round_metrics_row(const RoundMetrics& m, const std::string& arm) {
  return {arm,
          std::to_string(m.round),
          std::to_string(m.collected),
          std::to_string(m.collected_success),
          std::to_string(m.n_accepted),
          std::to_string(m.n_rejected),
          std::to_string(m.eval.n_trials),
          std::to_string(m.eval.n_success),
          format_real(m.eval.rate),
          format_real(m.eval.ci_lo),
          format_real(m.eval.ci_hi),
          format_real(m.eval.idle_failure_fraction),
          format_real(m.eval.mean_perturbations_per_episode)};
}

}  // namespace pauseflow
