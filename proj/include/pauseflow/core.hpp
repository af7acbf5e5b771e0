#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pauseflow {

using Vec = std::vector<double>;
using nlohmann::json;

// Error taxonomy. The CLI maps UsageError to exit code 2 and everything else
// to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& episode_id, const std::string& what)
      : Error("episode '" + episode_id + "': " + what), episode_id_(episode_id) {}
  const std::string& episode_id() const { return episode_id_; }

 private:
  std::string episode_id_;
};

/// One control step. `joints` is the position before `action` is applied.
struct Step {
  int t = 0;
  Vec obs;
  Vec joints;
  Vec action;
  bool perturbed = false;

  bool operator==(const Step&) const = default;
};

struct Episode {
  std::string episode_id;
  std::string env_name;
  std::uint64_t seed = 0;
  std::vector<Step> steps;
  Vec final_joints;
  bool success = false;

  /// Joint positions used for idle detection: each step's joints followed by
  /// final_joints, so steps.size() + 1 entries.
  std::vector<Vec> positions() const;

  /// Number of steps whose action was produced by a perturbation.
  int perturbed_count() const;

  bool operator==(const Episode&) const = default;
};

struct Dataset {
  std::vector<Episode> episodes;
  std::string provenance = "expert";  // "expert" or "rollout-round-<k>"
};

std::string round_provenance(int round);

struct IdleConfig {
  double epsilon = 0.005;
  int t_min = 8;
  int stride = 1;  // downsample positions before detection (1 = every step)

  void validate() const;
};

struct EnvDims {
  std::size_t obs_dim = 0;
  std::size_t joint_dim = 0;
};

struct Validation {
  bool ok = true;
  std::string message;

  explicit operator bool() const { return ok; }
  static Validation pass() { return {}; }
  static Validation fail(std::string msg) { return {false, std::move(msg)}; }
};

/// Checks every Step/Episode invariant; reports the first violation.
Validation validate_episode(const Episode& episode, EnvDims dims);

/// Checks id uniqueness on top of per-episode validation.
Validation validate_dataset(std::span<const Episode> episodes, EnvDims dims);

json episode_to_json(const Episode& episode);
Episode episode_from_json(const json& j);

/// Writes one JSON object per line. Every episode is validated against the
/// dims of the first episode before anything is written.
std::size_t write_episodes(const std::filesystem::path& path,
                           std::span<const Episode> episodes);

std::vector<Episode> read_episodes(const std::filesystem::path& path);

json idle_config_to_json(const IdleConfig& c);
IdleConfig idle_config_from_json(const json& j);

/// Writes text atomically enough for our purposes: truncate + write + check.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pauseflow
