#include "pauseflow/config.hpp"

#include <functional>

namespace pauseflow {

void check_known_keys(const json& j, std::initializer_list<const char*> allowed,
                      const std::string& path) {
  if (!j.is_object()) throw UsageError("config field '" + path + "': expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) {
      const std::string full = path.empty() ? key : path + "." + key;
      throw UsageError("config field '" + full + "': unknown key");
    }
  }
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Runs `parse` on j[key] (when present) and tags any failure with the field path.
void section(const json& j, const std::string& key, const std::string& path,
             const std::function<void(const json&, const std::string&)>& parse) {
  if (!j.contains(key)) return;
  const std::string full = join(path, key);
  try {
    parse(j.at(key), full);
  } catch (const UsageError& e) {
    const std::string what = e.what();
    if (what.rfind("config field", 0) == 0) throw;
    throw UsageError("config field '" + full + "': " + what);
  } catch (const json::exception& e) {
    throw UsageError("config field '" + full + "': " + e.what());
  }
}

template <class T>
void read(const json& j, const std::string& key, const std::string& path, T& out) {
  section(j, key, path, [&](const json& v, const std::string&) { v.get_to(out); });
}

}  // namespace

json rollout_config_to_json(const RolloutConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"idle", idle_config_to_json(c.idle)},
          {"cooldown", c.cooldown},
          {"pip", pip_config_to_json(c.pip)},
          {"noise", noise_config_to_json(c.noise)},
          {"rnd", rnd_config_to_json(c.rnd)},
          {"rnd_seed", c.rnd_seed},
          {"deterministic_actions", c.deterministic_actions}};
}

namespace {

void parse_rollout(const json& j, const std::string& path, RolloutConfig& c) {
  check_known_keys(j, {"mode", "idle", "cooldown", "pip", "noise", "rnd", "rnd_seed",
                       "deterministic_actions"},
                   path);
  section(j, "mode", path, [&](const json& v, const std::string&) {
    c.mode = parse_perturb_mode(v.get<std::string>());
  });
  section(j, "idle", path, [&](const json& v, const std::string& p) {
    check_known_keys(v, {"epsilon", "t_min", "stride"}, p);
    c.idle = idle_config_from_json(v);
  });
  read(j, "cooldown", path, c.cooldown);
  section(j, "pip", path, [&](const json& v, const std::string& p) {
    check_known_keys(v, {"sigma", "hold_steps", "max_triggers"}, p);
    c.pip = pip_config_from_json(v);
  });
  section(j, "noise", path, [&](const json& v, const std::string& p) {
    check_known_keys(v, {"explore_prob", "std"}, p);
    c.noise = noise_config_from_json(v);
  });
  section(j, "rnd", path, [&](const json& v, const std::string& p) {
    check_known_keys(v, {"embedding_dim", "hidden_sizes", "learn_rate", "n_candidates"}, p);
    c.rnd = rnd_config_from_json(v);
  });
  read(j, "rnd_seed", path, c.rnd_seed);
  read(j, "deterministic_actions", path, c.deterministic_actions);
}

void parse_rounds(const json& j, const std::string& path, RoundConfig& c) {
  check_known_keys(j, {"rounds", "rollouts_per_round", "improve_mode", "alpha", "beta",
                       "finetune_steps", "batch_size", "lr", "window", "collect", "eval_episodes",
                       "eval_mode", "jobs"},
                   path);
  read(j, "rounds", path, c.rounds);
  read(j, "rollouts_per_round", path, c.rollouts_per_round);
  section(j, "improve_mode", path, [&](const json& v, const std::string&) {
    c.improve_mode = parse_improve_mode(v.get<std::string>());
  });
  read(j, "alpha", path, c.alpha);
  read(j, "beta", path, c.beta);
  read(j, "finetune_steps", path, c.finetune_steps);
  read(j, "batch_size", path, c.batch_size);
  read(j, "lr", path, c.adam.lr);
  read(j, "window", path, c.window);
  section(j, "collect", path,
          [&](const json& v, const std::string& p) { parse_rollout(v, p, c.collect); });
  read(j, "eval_episodes", path, c.eval_episodes);
  section(j, "eval_mode", path, [&](const json& v, const std::string&) {
    c.eval_mode = parse_perturb_mode(v.get<std::string>());
  });
  read(j, "jobs", path, c.jobs);
}

}  // namespace

RolloutConfig rollout_config_from_json(const json& j) {
  RolloutConfig c;
  parse_rollout(j, "", c);
  c.validate();
  return c;
}

json round_config_to_json(const RoundConfig& c) {
  return {{"rounds", c.rounds},
          {"rollouts_per_round", c.rollouts_per_round},
          {"improve_mode", to_string(c.improve_mode)},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"finetune_steps", c.finetune_steps},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"window", c.window},
          {"collect", rollout_config_to_json(c.collect)},
          {"eval_episodes", c.eval_episodes},
          {"eval_mode", to_string(c.eval_mode)},
          {"jobs", c.jobs}};
}

RoundConfig round_config_from_json(const json& j) {
  RoundConfig c;
  parse_rounds(j, "", c);
  c.validate();
  return c;
}

ExperimentConfig default_experiment_config() { return {}; }

json experiment_config_to_json(const ExperimentConfig& c) {
  json policy = policy_config_to_json(c.policy);
  policy.erase("obs_dim");
  policy.erase("action_dim");
  return {{"config_version", kConfigVersion},
          {"env", env_config_to_json(c.env)},
          {"expert", expert_config_to_json(c.expert)},
          {"policy", policy},
          {"demos", {{"n", c.demos_n}, {"seed", c.demos_seed}}},
          {"train", {{"steps", c.train.steps}, {"batch_size", c.train.batch_size}, {"lr", c.train.adam.lr}}},
          {"rollout", rollout_config_to_json(c.rollout)},
          {"rounds", round_config_to_json(c.rounds)}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  check_known_keys(j, {"config_version", "env", "expert", "policy", "demos", "train", "rollout",
                       "rounds"},
                   "");
  section(j, "config_version", "", [](const json& v, const std::string&) {
    if (v.get<int>() != kConfigVersion)
      throw UsageError("unsupported config_version " + std::to_string(v.get<int>()));
  });
  section(j, "env", "", [&](const json& v, const std::string& p) {
    check_known_keys(v, {"gate_width", "gate_x_range", "max_step", "goal", "goal_radius",
                         "horizon", "wall_y", "contact_margin"},
                     p);
    c.env = env_config_from_json(v);
  });
  section(j, "expert", "", [&](const json& v, const std::string& p) {
    check_known_keys(v, {"pause_mean", "pause_jitter_std", "precision_zone_radius",
                         "precision_step", "target_noise_std"},
                     p);
    c.expert = expert_config_from_json(v);
    c.expert.validate(c.env);
  });
  section(j, "policy", "", [&](const json& v, const std::string& p) {
    check_known_keys(v, {"obs_dim", "action_dim", "chunk_len", "open_loop", "hidden_sizes",
                         "activation", "scale_floor"},
                     p);
    c.policy = policy_config_from_json(v);
  });
  section(j, "demos", "", [&](const json& v, const std::string& p) {
    check_known_keys(v, {"n", "seed"}, p);
    read(v, "n", p, c.demos_n);
    read(v, "seed", p, c.demos_seed);
    if (c.demos_n < 1) throw UsageError("config field '" + p + ".n': must be >= 1");
  });
  section(j, "train", "", [&](const json& v, const std::string& p) {
    check_known_keys(v, {"steps", "batch_size", "lr"}, p);
    read(v, "steps", p, c.train.steps);
    read(v, "batch_size", p, c.train.batch_size);
    read(v, "lr", p, c.train.adam.lr);
  });
  section(j, "rollout", "", [&](const json& v, const std::string& p) {
    parse_rollout(v, p, c.rollout);
    c.rollout.validate();
  });
  section(j, "rounds", "", [&](const json& v, const std::string& p) {
    parse_rounds(v, p, c.rounds);
    c.rounds.validate();
  });
  return c;
}

json load_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace pauseflow
