#include "pauseflow/cli.hpp"

#include <chrono>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>

#include "pauseflow/config.hpp"
#include "pauseflow/envs.hpp"
#include "pauseflow/flywheel.hpp"
#include "pauseflow/idle.hpp"
#include "pauseflow/metrics.hpp"
#include "pauseflow/policy.hpp"

namespace pauseflow {

namespace fs = std::filesystem;

namespace {

class Manifest {
 public:
  Manifest(const std::vector<std::string>& args, std::string command)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["command_line"] = args;
    doc_["tool_version"] = PAUSEFLOW_VERSION;
    doc_["artifacts"] = json::array();
  }

  void seed(std::uint64_t s) { doc_["master_seed"] = s; }
  void config(json c) { doc_["config"] = std::move(c); }
  void set(const std::string& key, json v) { doc_[key] = std::move(v); }
  void artifact(const fs::path& p) { doc_["artifacts"].push_back(p.string()); }

  void write(const fs::path& path) {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    doc_["wall_clock_seconds"] = std::chrono::duration<double>(elapsed).count();
    doc_["artifacts"].push_back(path.string());
    write_text_file(path, doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

fs::path manifest_path_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

NarrowGateConfig load_env(const std::string& path) {
  if (path.empty()) return {};
  const json j = load_json_file(path);
  check_known_keys(j, {"gate_width", "gate_x_range", "max_step", "goal", "goal_radius", "horizon",
                       "wall_y", "contact_margin"},
                   "env");
  try {
    return env_config_from_json(j);
  } catch (const json::exception& e) {
    throw UsageError(std::string("env config: ") + e.what());
  }
}

RolloutConfig load_rollout(const std::string& path) {
  if (path.empty()) return {};
  try {
    return rollout_config_from_json(load_json_file(path));
  } catch (const json::exception& e) {
    throw UsageError(std::string("rollout config: ") + e.what());
  }
}

struct Context {
  const std::vector<std::string>& args;
  std::ostream& out;
  std::ostream& err;
};

// ---- gen-demos ----------------------------------------------------------

struct GenDemosArgs {
  std::string env_config, expert_config, out;
  int n = 0;
  std::uint64_t seed = 0;
};

int cmd_gen_demos(const GenDemosArgs& a, Context& ctx) {
  Manifest m(ctx.args, "gen-demos");
  const NarrowGateConfig env = load_env(a.env_config);
  ExpertConfig expert;
  if (!a.expert_config.empty()) {
    const json j = load_json_file(a.expert_config);
    check_known_keys(j, {"pause_mean", "pause_jitter_std", "precision_zone_radius",
                         "precision_step", "target_noise_std"},
                     "expert");
    expert = expert_config_from_json(j);
  }
  expert.validate(env);
  int regenerated = 0;
  const Dataset ds = gen_demos(env, expert, a.n, a.seed, [&](const std::string& msg) {
    ++regenerated;
    ctx.err << msg << "\n";
  });
  write_episodes(a.out, ds.episodes);
  m.seed(a.seed);
  m.config({{"env", env_config_to_json(env)}, {"expert", expert_config_to_json(expert)}, {"n", a.n}});
  m.set("regenerated", regenerated);
  m.artifact(a.out);
  m.write(manifest_path_for(a.out));
  ctx.err << "wrote " << ds.episodes.size() << " demos to " << a.out << "\n";
  return 0;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string demos, policy_config, out;
  std::vector<std::string> rollouts;
  int steps = 20000;
  int batch_size = 64;
  double lr = 1e-3;
  double filter_small_actions = 0.0;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, Context& ctx) {
  Manifest m(ctx.args, "train");
  PolicyConfig pc;
  if (!a.policy_config.empty()) pc = policy_config_from_json(load_json_file(a.policy_config));

  std::vector<Episode> episodes = read_episodes(a.demos);
  int rollout_successes = 0;
  for (const auto& path : a.rollouts) {
    for (auto& e : read_episodes(path)) {
      if (!e.success) continue;
      ++rollout_successes;
      episodes.push_back(std::move(e));
    }
  }
  if (a.filter_small_actions > 0.0)
    for (auto& e : episodes) e = filter_small_actions(e, a.filter_small_actions);

  std::vector<Sample> samples;
  for (const auto& e : episodes) {
    auto s = make_samples(e, pc.chunk_len);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  if (samples.empty()) throw Error("training set is empty");
  pc.obs_dim = static_cast<int>(samples.front().obs.size());
  pc.action_dim = static_cast<int>(samples.front().chunk.size() / pc.chunk_len);

  PolicyParams init = init_policy(pc, derive_seed(a.seed, {0x1a17}));
  init.obs_norm = fit_obs_norm(samples);
  const TrainSchedule schedule{{a.lr, 0.9, 0.999, 1e-8}, a.batch_size, a.steps, a.seed};
  const TrainResult r = train(init, bc_objective(samples, a.batch_size), schedule);

  save_policy(a.out, r.params);
  CsvTable curve{{"step", "loss"}, {}};
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i)
    curve.rows.push_back({std::to_string(i), format_real(r.loss_curve[i])});
  const fs::path curve_path = sibling(a.out, ".loss.csv");
  emit_report(curve_path, curve);

  m.seed(a.seed);
  m.config({{"policy", policy_config_to_json(pc)},
            {"steps", a.steps},
            {"batch_size", a.batch_size},
            {"lr", a.lr},
            {"filter_small_actions", a.filter_small_actions},
            {"demos", a.demos},
            {"rollouts", a.rollouts}});
  m.set("n_samples", samples.size());
  m.set("rollout_successes", rollout_successes);
  m.artifact(a.out);
  m.artifact(curve_path);
  m.write(manifest_path_for(a.out));
  if (!r.loss_curve.empty())
    ctx.err << "loss " << r.loss_curve.front() << " -> " << r.loss_curve.back() << "\n";
  return 0;
}

// ---- rollout / eval -----------------------------------------------------

struct RolloutArgs {
  std::string policy, env_config, rollout_config, perturb = "none", out, report, arm;
  int n = 0;
  int jobs = 1;
  std::uint64_t seed = 0;
  bool deterministic = false;
};

int cmd_rollout(const RolloutArgs& a, Context& ctx) {
  Manifest m(ctx.args, "rollout");
  const PolicyParams policy = load_policy(a.policy);
  const NarrowGateConfig env = load_env(a.env_config);
  RolloutConfig rc = load_rollout(a.rollout_config);
  rc.mode = parse_perturb_mode(a.perturb);
  // Collection samples unless told otherwise; a config file may also opt in.
  if (a.rollout_config.empty()) rc.deterministic_actions = false;
  if (a.deterministic) rc.deterministic_actions = true;
  const Dataset ds = collect(policy, env, a.n, a.seed, rc, a.jobs, "rollout-round-0");
  write_episodes(a.out, ds.episodes);

  int successes = 0, triggers = 0;
  json per_episode = json::array();
  for (const auto& e : ds.episodes) {
    successes += e.success ? 1 : 0;
    const int t = count_triggers(e);
    triggers += t;
    per_episode.push_back(t);
  }
  m.seed(a.seed);
  m.config({{"env", env_config_to_json(env)}, {"rollout", rollout_config_to_json(rc)}, {"n", a.n}});
  m.set("trigger_counts", per_episode);
  m.set("total_triggers", triggers);
  m.artifact(a.out);
  m.write(manifest_path_for(a.out));
  ctx.out << "episodes=" << ds.episodes.size() << " successes=" << successes
          << " triggers=" << triggers << "\n";
  return 0;
}

int cmd_eval(const RolloutArgs& a, Context& ctx) {
  Manifest m(ctx.args, "eval");
  const PolicyParams policy = load_policy(a.policy);
  const NarrowGateConfig env = load_env(a.env_config);
  RolloutConfig rc = load_rollout(a.rollout_config);
  rc.mode = parse_perturb_mode(a.perturb);
  const EvalReport r = evaluate_policy(policy, env, a.n, a.seed, rc, a.jobs);
  const std::string arm = a.arm.empty() ? a.perturb : a.arm;
  emit_report(a.report, {eval_header(), {eval_row(arm, r)}});
  m.seed(a.seed);
  m.config({{"env", env_config_to_json(env)}, {"rollout", rollout_config_to_json(rc)}, {"n", a.n}});
  m.artifact(a.report);
  m.write(manifest_path_for(a.report));
  ctx.out << arm << ": " << r.n_success << "/" << r.n_trials << " rate=" << r.rate << " ci=["
          << r.ci_lo << ", " << r.ci_hi << "]\n";
  return 0;
}

// ---- label --------------------------------------------------------------

struct LabelArgs {
  std::string rollouts, out;
  IdleConfig idle;
  int window = -1;
  bool include_idle_steps = false;
};

int cmd_label(const LabelArgs& a, Context& ctx) {
  Manifest m(ctx.args, "label");
  // Zero epsilon is legal here: the strict d < 0 test simply never fires.
  if (a.idle.epsilon < 0.0 || a.idle.t_min < 1) throw UsageError("invalid idle parameters");
  const auto episodes = read_episodes(a.rollouts);
  std::vector<EpisodeLabel> labels;
  if (a.idle.epsilon == 0.0) {
    for (const auto& e : episodes) labels.push_back({e.episode_id, {}, {}});
  } else {
    LabelOptions lo;
    lo.idle = a.idle;
    lo.window = a.window;
    lo.include_idle_steps = a.include_idle_steps;
    labels = label_episodes(episodes, lo);
  }
  write_labels(a.out, labels);
  std::size_t n_keys = 0;
  for (const auto& l : labels) n_keys += l.d_f_keys.size();
  m.config({{"idle", idle_config_to_json(a.idle)}, {"window", a.window}});
  m.set("n_rejected", n_keys);
  m.artifact(a.out);
  m.write(manifest_path_for(a.out));
  ctx.err << "labeled " << labels.size() << " episodes, " << n_keys << " rejected steps\n";
  return 0;
}

// ---- improve ------------------------------------------------------------

struct ImproveArgs {
  std::string policy, demos, mode = "pmpo", out;
  std::vector<std::string> rollouts;
  double alpha = 0.9, beta = 0.3, lr = 1e-3;
  int steps = 2000, batch_size = 64, window = -1;
  IdleConfig idle;
  std::uint64_t seed = 0;
};

int cmd_improve(const ImproveArgs& a, Context& ctx) {
  Manifest m(ctx.args, "improve");
  if (a.alpha < 0.0 || a.alpha > 1.0) throw UsageError("--alpha must be in [0, 1]");
  if (a.beta < 0.0) throw UsageError("--beta must be >= 0");
  a.idle.validate();
  const PolicyParams policy = load_policy(a.policy);
  std::vector<Episode> expert;
  if (!a.demos.empty()) expert = read_episodes(a.demos);
  std::vector<Episode> rollouts;
  for (const auto& p : a.rollouts) {
    auto e = read_episodes(p);
    rollouts.insert(rollouts.end(), e.begin(), e.end());
  }
  ImproveConfig ic;
  ic.mode = parse_improve_mode(a.mode);
  ic.alpha = a.alpha;
  ic.beta = a.beta;
  ic.schedule = {{a.lr, 0.9, 0.999, 1e-8}, a.batch_size, a.steps, a.seed};
  ic.labels.idle = a.idle;
  ic.labels.window = a.window;
  ImproveResult r;
  try {
    r = improve(policy, expert, rollouts, ic);
  } catch (const UsageError& e) {
    // An empty accepted set is a data problem, not a usage problem.
    throw Error(e.what());
  }
  save_policy(a.out, r.trained.params);
  m.seed(a.seed);
  m.config({{"mode", a.mode},
            {"alpha", a.alpha},
            {"beta", a.beta},
            {"steps", a.steps},
            {"batch_size", a.batch_size},
            {"lr", a.lr},
            {"idle", idle_config_to_json(a.idle)},
            {"window", a.window}});
  m.set("n_accepted", r.n_accepted);
  m.set("n_rejected", r.n_rejected);
  m.artifact(a.out);
  m.write(manifest_path_for(a.out));
  ctx.err << "improved with " << r.n_accepted << " accepted / " << r.n_rejected << " rejected\n";
  return 0;
}

// ---- analyze ------------------------------------------------------------

struct AnalyzeArgs {
  std::string rollouts, policy, report, arm = "rollouts";
  IdleConfig idle;
  bool variance = false;
  int n_samples = 16;
  std::uint64_t seed = 0;
};

int cmd_analyze(const AnalyzeArgs& a, Context& ctx) {
  if (a.variance && a.policy.empty()) throw UsageError("--variance requires --policy");
  a.idle.validate();
  Manifest m(ctx.args, "analyze");
  const auto episodes = read_episodes(a.rollouts);
  const fs::path dir = a.report;
  fs::create_directories(dir);
  const EvalReport r = evaluate_episodes(episodes, a.idle);
  emit_report(dir / "eval.csv", {eval_header(), {eval_row(a.arm, r)}});
  m.artifact(dir / "eval.csv");
  const IdleFailureSummary idle = idle_failure_fraction(episodes, a.idle);
  ctx.out << "idle_failure_fraction=" << idle.fraction << " failures=" << idle.n_failures << "\n";
  if (!a.policy.empty()) {
    const PolicyParams policy = load_policy(a.policy);
    const VarianceReport v = action_variance_report(policy, episodes, a.idle, a.n_samples, a.seed);
    emit_report(dir / "variance.csv", {variance_header(), {variance_row(a.arm, v)}});
    m.artifact(dir / "variance.csv");
    ctx.out << "var_idle=" << format_optional(v.var_idle)
            << " var_nonidle=" << format_optional(v.var_nonidle) << "\n";
  }
  m.seed(a.seed);
  m.config({{"idle", idle_config_to_json(a.idle)}, {"n_samples", a.n_samples}});
  m.set("n_failures", idle.n_failures);
  m.write(dir / "manifest.json");
  return 0;
}

// ---- flywheel -----------------------------------------------------------

struct FlywheelArgs {
  std::string config, out_dir;
  std::uint64_t seed = 0;
  int jobs = 0;  // 0 keeps the config value
};

int cmd_flywheel(const FlywheelArgs& a, Context& ctx) {
  Manifest m(ctx.args, "flywheel");
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = experiment_config_from_json(load_json_file(a.config));
  if (a.jobs > 0) cfg.rounds.jobs = a.jobs;
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);

  const Dataset demos = gen_demos(cfg.env, cfg.expert, cfg.demos_n,
                                  derive_seed(a.seed, {cfg.demos_seed, 0xde}));
  write_episodes(dir / "demos.jsonl", demos.episodes);
  m.artifact(dir / "demos.jsonl");

  PolicyConfig pc = cfg.policy;
  pc.obs_dim = static_cast<int>(kNarrowGateObsDim);
  pc.action_dim = static_cast<int>(kNarrowGateJointDim);
  std::vector<Sample> samples;
  for (const auto& e : demos.episodes) {
    auto s = make_samples(e, pc.chunk_len);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  PolicyParams base = init_policy(pc, derive_seed(a.seed, {0x1a17}));
  base.obs_norm = fit_obs_norm(samples);
  const TrainSchedule schedule{cfg.train.adam, cfg.train.batch_size, cfg.train.steps,
                               derive_seed(a.seed, {0x7a}) };
  base = train(base, bc_objective(samples, cfg.train.batch_size), schedule).params;
  save_policy(dir / "base_policy.json", base);
  m.artifact(dir / "base_policy.json");

  RolloutConfig eval_cfg = cfg.rounds.collect;
  eval_cfg.mode = cfg.rounds.eval_mode;
  eval_cfg.deterministic_actions = true;
  RoundMetrics base_metrics;
  base_metrics.eval =
      evaluate_policy(base, cfg.env, cfg.rounds.eval_episodes, a.seed, eval_cfg, cfg.rounds.jobs);

  const auto records = run_rounds(base, demos.episodes, cfg.env, cfg.rounds, a.seed, dir);
  const std::string arm = to_string(cfg.rounds.improve_mode);
  CsvTable combined{round_metrics_header(), {round_metrics_row(base_metrics, arm)}};
  for (const auto& r : records) {
    combined.rows.push_back(round_metrics_row(r.metrics, arm));
    const fs::path rd = dir / ("round_" + std::to_string(r.metrics.round));
    m.artifact(rd / "rollouts.jsonl");
    m.artifact(rd / "policy.json");
    m.artifact(rd / "metrics.csv");
    ctx.out << "round " << r.metrics.round << ": collected " << r.metrics.collected_success << "/"
            << r.metrics.collected << " eval rate " << r.metrics.eval.rate << "\n";
  }
  emit_report(dir / "metrics.csv", combined);
  m.artifact(dir / "metrics.csv");
  m.seed(a.seed);
  m.config(experiment_config_to_json(cfg));
  json seeds = json::object();
  for (int k = 1; k <= cfg.rounds.rounds; ++k)
    seeds["round_" + std::to_string(k)] = {
        {"collect", derive_seed(a.seed, {static_cast<std::uint64_t>(k), 1})},
        {"train", derive_seed(a.seed, {static_cast<std::uint64_t>(k), 2})}};
  seeds["eval"] = eval_seed(a.seed);
  m.set("seeds", seeds);
  m.write(dir / "manifest.json");
  return 0;
}

void add_idle_flags(CLI::App* cmd, IdleConfig& idle) {
  cmd->add_option("--idle-epsilon", idle.epsilon, "Idle motion threshold")->capture_default_str();
  cmd->add_option("--idle-tmin", idle.t_min, "Minimum idle run length")->capture_default_str();
  cmd->add_option("--idle-stride", idle.stride, "Position subsampling stride")->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pauseflow: idle detection, pause-induced perturbations and preference fine-tuning"};
  app.require_subcommand(0, 1);
  bool print_default = false;
  app.add_flag("--print-default-config", print_default, "Print the default experiment config");
  app.set_version_flag("--version", PAUSEFLOW_VERSION);

  GenDemosArgs gd;
  auto* gen = app.add_subcommand("gen-demos", "Generate expert demonstrations");
  gen->add_option("--env-config", gd.env_config, "Environment config JSON");
  gen->add_option("--expert-config", gd.expert_config, "Expert config JSON");
  gen->add_option("--n", gd.n, "Number of demos")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gd.seed, "Master seed");
  gen->add_option("--out", gd.out, "Output JSONL")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Behavior cloning on demos and successful rollouts");
  train_cmd->add_option("--demos", tr.demos, "Demo JSONL")->required();
  train_cmd->add_option("--rollouts", tr.rollouts, "Rollout JSONL files (successes only are used)");
  train_cmd->add_option("--policy-config", tr.policy_config, "Policy config JSON");
  train_cmd->add_option("--train-steps", tr.steps, "Optimizer steps")->capture_default_str()->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch-size", tr.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--filter-small-actions", tr.filter_small_actions,
                        "Drop steps whose action moved less than this from the previous action");
  train_cmd->add_option("--seed", tr.seed, "Seed");
  train_cmd->add_option("--out", tr.out, "Output policy JSON")->required();

  RolloutArgs ro;
  auto* rollout_cmd = app.add_subcommand("rollout", "Collect rollouts with a policy");
  rollout_cmd->add_option("--policy", ro.policy, "Policy JSON")->required();
  rollout_cmd->add_option("--env-config", ro.env_config, "Environment config JSON");
  rollout_cmd->add_option("--rollout-config", ro.rollout_config, "Rollout config JSON");
  rollout_cmd->add_option("--n", ro.n, "Episodes")->required()->check(CLI::PositiveNumber);
  rollout_cmd->add_option("--perturb", ro.perturb, "none|pip|noise|rnd")
      ->check(CLI::IsMember({"none", "pip", "noise", "rnd"}));
  rollout_cmd->add_option("--seed", ro.seed, "Master seed");
  rollout_cmd->add_option("--out", ro.out, "Output JSONL")->required();
  rollout_cmd->add_flag("--deterministic", ro.deterministic, "Execute chunk means");
  rollout_cmd->add_option("--jobs", ro.jobs, "Worker threads")->check(CLI::PositiveNumber);

  RolloutArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy (chunk means unless the rollout config says otherwise)");
  eval_cmd->add_option("--policy", ev.policy, "Policy JSON")->required();
  eval_cmd->add_option("--env-config", ev.env_config, "Environment config JSON");
  eval_cmd->add_option("--rollout-config", ev.rollout_config, "Rollout config JSON");
  eval_cmd->add_option("--n", ev.n, "Episodes")->required()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--perturb", ev.perturb, "none|pip|noise|rnd")
      ->check(CLI::IsMember({"none", "pip", "noise", "rnd"}));
  eval_cmd->add_option("--seed", ev.seed, "Master seed");
  eval_cmd->add_option("--report", ev.report, "Output eval.csv")->required();
  eval_cmd->add_option("--arm", ev.arm, "Arm name in the report (default: perturb mode)");
  eval_cmd->add_option("--jobs", ev.jobs, "Worker threads")->check(CLI::PositiveNumber);

  LabelArgs lb;
  auto* label_cmd = app.add_subcommand("label", "Detect idle segments and preference labels");
  label_cmd->add_option("--rollouts", lb.rollouts, "Rollout JSONL")->required();
  label_cmd->add_option("--idle-epsilon", lb.idle.epsilon, "Idle motion threshold")->capture_default_str();
  label_cmd->add_option("--idle-tmin", lb.idle.t_min, "Minimum idle run length")->capture_default_str();
  label_cmd->add_option("--idle-stride", lb.idle.stride, "Position subsampling stride")->capture_default_str();
  label_cmd->add_option("--window", lb.window, "Pre-idle window (default t_min)");
  label_cmd->add_flag("--include-idle-steps", lb.include_idle_steps, "Also reject steps inside segments");
  label_cmd->add_option("--out", lb.out, "Output label JSONL")->required();

  ImproveArgs im;
  auto* improve_cmd = app.add_subcommand("improve", "Fine-tune a policy on collected rollouts");
  improve_cmd->add_option("--policy", im.policy, "Policy JSON")->required();
  improve_cmd->add_option("--demos", im.demos, "Demo JSONL");
  improve_cmd->add_option("--rollouts", im.rollouts, "Rollout JSONL files")->required();
  improve_cmd->add_option("--mode", im.mode, "bc-success|pmpo")
      ->check(CLI::IsMember({"bc-success", "pmpo"}))->capture_default_str();
  improve_cmd->add_option("--alpha", im.alpha, "Accepted/rejected weighting")->capture_default_str();
  improve_cmd->add_option("--beta", im.beta, "KL weight")->capture_default_str();
  improve_cmd->add_option("--steps", im.steps, "Optimizer steps")->capture_default_str();
  improve_cmd->add_option("--batch-size", im.batch_size, "Minibatch size")->capture_default_str();
  improve_cmd->add_option("--lr", im.lr, "Adam learning rate")->capture_default_str();
  improve_cmd->add_option("--window", im.window, "Pre-idle window (default t_min)");
  add_idle_flags(improve_cmd, im.idle);
  improve_cmd->add_option("--seed", im.seed, "Seed");
  improve_cmd->add_option("--out", im.out, "Output policy JSON")->required();

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Idle-failure fraction and action variance");
  analyze_cmd->add_option("--rollouts", an.rollouts, "Rollout JSONL")->required();
  analyze_cmd->add_option("--policy", an.policy, "Policy JSON (enables variance report)");
  add_idle_flags(analyze_cmd, an.idle);
  analyze_cmd->add_flag("--variance", an.variance, "Require the variance report");
  analyze_cmd->add_option("--n-samples", an.n_samples, "Samples per state")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--arm", an.arm, "Arm name in the reports");
  analyze_cmd->add_option("--seed", an.seed, "Sampling seed");
  analyze_cmd->add_option("--report", an.report, "Output directory")->required();

  FlywheelArgs fw;
  auto* flywheel_cmd = app.add_subcommand("flywheel", "Demos, base policy, and improvement rounds");
  flywheel_cmd->add_option("--config", fw.config, "Experiment config JSON");
  flywheel_cmd->add_option("--seed", fw.seed, "Master seed");
  flywheel_cmd->add_option("--out-dir", fw.out_dir, "Output directory")->required();
  flywheel_cmd->add_option("--jobs", fw.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Context ctx{args, out, err};
  try {
    if (print_default) {
      out << experiment_config_to_json(default_experiment_config()).dump(2) << "\n";
      return 0;
    }
    if (*gen) return cmd_gen_demos(gd, ctx);
    if (*train_cmd) return cmd_train(tr, ctx);
    if (*rollout_cmd) return cmd_rollout(ro, ctx);
    if (*eval_cmd) return cmd_eval(ev, ctx);
    if (*label_cmd) return cmd_label(lb, ctx);
    if (*improve_cmd) return cmd_improve(im, ctx);
    if (*analyze_cmd) return cmd_analyze(an, ctx);
    if (*flywheel_cmd) return cmd_flywheel(fw, ctx);
    err << app.help();
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pauseflow
