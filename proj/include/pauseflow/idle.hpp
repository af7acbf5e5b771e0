#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pauseflow/core.hpp"
#include "pauseflow/policy.hpp"

namespace pauseflow {

/// Maximal run of low-motion transitions [start, end). Transition i connects
/// position i to position i + 1.
struct IdleSegment {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  auto operator<=>(const IdleSegment&) const = default;
};

/// Every maximal run of transitions with ||p[i+1] - p[i]|| < epsilon whose
/// length exceeds t_min, in increasing order. With stride > 1 the positions
/// are subsampled first and segment bounds are reported in original
/// transition indices.
std::vector<IdleSegment> detect_idle_segments(std::span<const Vec> positions,
                                              const IdleConfig& config);

struct DetectorState {
  int run_length = 0;
  std::optional<Vec> last_position;
  int cooldown_remaining = 0;
  int since_sample = 0;  // calls since the last evaluated position (stride > 1)
};

/// Online counterpart of detect_idle_segments. The first call only records the
/// position. A trigger fires when the run exceeds t_min while no cooldown is
/// pending; the run then resets and the cooldown is armed.
std::pair<DetectorState, bool> streaming_update(DetectorState state,
                                                std::span<const double> new_position,
                                                const IdleConfig& config, int cooldown);

struct KeyedSample {
  std::string episode_id;
  int t = 0;
  Sample sample;
};

struct PreferenceDataset {
  std::vector<KeyedSample> accepted;  // every step of successful episodes
  std::vector<KeyedSample> rejected;  // pre-idle steps of failed episodes

  std::vector<Sample> accepted_samples() const;
  std::vector<Sample> rejected_samples() const;
};

struct LabelOptions {
  IdleConfig idle;
  int window = -1;  // steps before each segment start; -1 means t_min
  int chunk_len = 10;
  bool include_idle_steps = false;  // also reject the steps inside each segment

  int effective_window() const { return window < 0 ? idle.t_min : window; }
};

/// Rejected step indices for one failed episode, sorted and unique.
std::vector<int> rejected_steps(const Episode& episode, std::span<const IdleSegment> segments,
                                const LabelOptions& options);

PreferenceDataset label_preferences(std::span<const Episode> episodes, const LabelOptions& options);

struct EpisodeLabel {
  std::string episode_id;
  std::vector<IdleSegment> segments;
  std::vector<int> d_f_keys;
};

std::vector<EpisodeLabel> label_episodes(std::span<const Episode> episodes,
                                         const LabelOptions& options);

/// JSON Lines: {episode_id, segments: [[start, end], ...], d_f_keys: [t, ...]}.
std::size_t write_labels(const std::filesystem::path& path, std::span<const EpisodeLabel> labels);
std::vector<EpisodeLabel> read_labels(const std::filesystem::path& path);

/// Drops steps whose action differs from the previous kept action by less than
/// `threshold` (l2). Used to build the pause-filtered baseline's training set.
Episode filter_small_actions(const Episode& episode, double threshold);

}  // namespace pauseflow
