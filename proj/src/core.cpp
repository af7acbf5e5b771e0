#include "pauseflow/core.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace pauseflow {

std::vector<Vec> Episode::positions() const {
  std::vector<Vec> out;
  out.reserve(steps.size() + 1);
  for (const auto& s : steps) out.push_back(s.joints);
  out.push_back(final_joints);
  return out;
}

int Episode::perturbed_count() const {
  int n = 0;
  for (const auto& s : steps) n += s.perturbed ? 1 : 0;
  return n;
}

std::string round_provenance(int round) { return "rollout-round-" + std::to_string(round); }

void IdleConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw UsageError("idle epsilon must be > 0");
  if (t_min < 1) throw UsageError("idle t_min must be >= 1");
  if (stride < 1) throw UsageError("idle stride must be >= 1");
}

namespace {

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

Validation validate_episode(const Episode& episode, EnvDims dims) {
  for (std::size_t i = 0; i < episode.steps.size(); ++i) {
    const Step& s = episode.steps[i];
    if (s.t != static_cast<int>(i)) return Validation::fail("non-consecutive indices");
    if (s.obs.size() != dims.obs_dim) return Validation::fail("obs length mismatch");
    if (s.joints.size() != dims.joint_dim) return Validation::fail("joints length mismatch");
    if (s.action.size() != dims.joint_dim) return Validation::fail("action length mismatch");
    if (!all_finite(s.obs) || !all_finite(s.joints) || !all_finite(s.action))
      return Validation::fail("non-finite value");
  }
  if (episode.final_joints.size() != dims.joint_dim)
    return Validation::fail("final_joints length mismatch");
  if (!all_finite(episode.final_joints)) return Validation::fail("non-finite value");
  return Validation::pass();
}

Validation validate_dataset(std::span<const Episode> episodes, EnvDims dims) {
  std::unordered_set<std::string> seen;
  for (const auto& e : episodes) {
    if (auto v = validate_episode(e, dims); !v) return Validation::fail(e.episode_id + ": " + v.message);
    if (!seen.insert(e.episode_id).second)
      return Validation::fail("duplicate episode_id '" + e.episode_id + "'");
  }
  return Validation::pass();
}

json episode_to_json(const Episode& e) {
  json steps = json::array();
  for (const auto& s : e.steps) {
    steps.push_back({{"t", s.t},
                     {"obs", s.obs},
                     {"joints", s.joints},
                     {"action", s.action},
                     {"perturbed", s.perturbed}});
  }
  return {{"episode_id", e.episode_id}, {"env_name", e.env_name},
          {"seed", e.seed},             {"steps", std::move(steps)},
          {"final_joints", e.final_joints}, {"success", e.success}};
}

Episode episode_from_json(const json& j) {
  Episode e;
  j.at("episode_id").get_to(e.episode_id);
  j.at("env_name").get_to(e.env_name);
  j.at("seed").get_to(e.seed);
  j.at("final_joints").get_to(e.final_joints);
  j.at("success").get_to(e.success);
  for (const auto& js : j.at("steps")) {
    Step s;
    js.at("t").get_to(s.t);
    js.at("obs").get_to(s.obs);
    js.at("joints").get_to(s.joints);
    js.at("action").get_to(s.action);
    js.at("perturbed").get_to(s.perturbed);
    e.steps.push_back(std::move(s));
  }
  return e;
}

std::size_t write_episodes(const std::filesystem::path& path, std::span<const Episode> episodes) {
  if (!episodes.empty()) {
    const EnvDims dims{episodes.front().steps.empty() ? 0 : episodes.front().steps.front().obs.size(),
                       episodes.front().final_joints.size()};
    std::unordered_set<std::string> seen;
    for (const auto& e : episodes) {
      EnvDims d = dims;
      if (!e.steps.empty()) d.obs_dim = e.steps.front().obs.size();
      if (auto v = validate_episode(e, d); !v) throw ValidationError(e.episode_id, v.message);
      if (e.final_joints.size() != dims.joint_dim)
        throw ValidationError(e.episode_id, "joint dimension differs from dataset");
      if (!seen.insert(e.episode_id).second)
        throw ValidationError(e.episode_id, "duplicate episode_id");
    }
  }
  std::string text;
  for (const auto& e : episodes) {
    text += episode_to_json(e).dump();
    text += '\n';
  }
  write_text_file(path, text);
  return episodes.size();
}

std::vector<Episode> read_episodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<Episode> out;
  std::string line;
  std::size_t lineno = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Episode e;
    try {
      e = episode_from_json(json::parse(line));
    } catch (const json::exception& ex) {
      throw ParseError(ex.what(), lineno);
    }
    const EnvDims dims{e.steps.empty() ? 0 : e.steps.front().obs.size(), e.final_joints.size()};
    if (auto v = validate_episode(e, dims); !v) throw ValidationError(e.episode_id, v.message);
    if (!seen.insert(e.episode_id).second) throw ValidationError(e.episode_id, "duplicate episode_id");
    out.push_back(std::move(e));
  }
  return out;
}

json idle_config_to_json(const IdleConfig& c) {
  return {{"epsilon", c.epsilon}, {"t_min", c.t_min}, {"stride", c.stride}};
}

IdleConfig idle_config_from_json(const json& j) {
  IdleConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.t_min = j.value("t_min", c.t_min);
  c.stride = j.value("stride", c.stride);
  c.validate();
  return c;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pauseflow
