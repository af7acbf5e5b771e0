#include "pauseflow/idle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace pauseflow {

namespace {

double l2_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("position dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

std::vector<IdleSegment> detect_idle_segments(std::span<const Vec> positions,
                                              const IdleConfig& config) {
  config.validate();
  const int stride = config.stride;
  std::vector<IdleSegment> out;
  if (positions.size() < 2) return out;

  const int n_sub = static_cast<int>((positions.size() - 1) / stride) + 1;
  int run_start = -1;
  auto close = [&](int end) {
    if (run_start >= 0 && end - run_start > config.t_min)
      out.push_back({run_start * stride, end * stride});
    run_start = -1;
  };
  for (int i = 0; i + 1 < n_sub; ++i) {
    const double d = l2_diff(positions[(i + 1) * stride], positions[i * stride]);
    if (d < config.epsilon) {
      if (run_start < 0) run_start = i;
    } else {
      close(i);
    }
  }
  close(n_sub - 1);
  return out;
}

std::pair<DetectorState, bool> streaming_update(DetectorState state,
                                                std::span<const double> new_position,
                                                const IdleConfig& config, int cooldown) {
  if (!state.last_position) {
    state.last_position = Vec(new_position.begin(), new_position.end());
    return {std::move(state), false};
  }
  bool evaluate = true;
  if (config.stride > 1) {
    evaluate = ++state.since_sample >= config.stride;
    if (evaluate) state.since_sample = 0;
  }
  if (evaluate) {
    const double d = l2_diff(new_position, *state.last_position);
    state.last_position = Vec(new_position.begin(), new_position.end());
    state.run_length = d < config.epsilon ? state.run_length + 1 : 0;
  }
  bool triggered = false;
  if (state.cooldown_remaining > 0) {
    --state.cooldown_remaining;
  } else if (state.run_length > config.t_min) {
    triggered = true;
    state.run_length = 0;
    state.cooldown_remaining = std::max(0, cooldown);
  }
  return {std::move(state), triggered};
}

std::vector<Sample> PreferenceDataset::accepted_samples() const {
  std::vector<Sample> out;
  out.reserve(accepted.size());
  for (const auto& k : accepted) out.push_back(k.sample);
  return out;
}

std::vector<Sample> PreferenceDataset::rejected_samples() const {
  std::vector<Sample> out;
  out.reserve(rejected.size());
  for (const auto& k : rejected) out.push_back(k.sample);
  return out;
}

std::vector<int> rejected_steps(const Episode& episode, std::span<const IdleSegment> segments,
                                const LabelOptions& options) {
  if (episode.success) return {};
  const int W = options.effective_window();
  const int T = static_cast<int>(episode.steps.size());
  std::set<int> keys;
  for (const auto& seg : segments) {
    for (int t = std::max(0, seg.start - W); t < seg.start && t < T; ++t) keys.insert(t);
    if (options.include_idle_steps)
      for (int t = seg.start; t < seg.end && t < T; ++t) keys.insert(t);
  }
  return {keys.begin(), keys.end()};
}

std::vector<EpisodeLabel> label_episodes(std::span<const Episode> episodes,
                                         const LabelOptions& options) {
  std::vector<EpisodeLabel> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) {
    const auto pos = e.positions();
    EpisodeLabel l{e.episode_id, detect_idle_segments(pos, options.idle), {}};
    l.d_f_keys = rejected_steps(e, l.segments, options);
    out.push_back(std::move(l));
  }
  return out;
}

PreferenceDataset label_preferences(std::span<const Episode> episodes, const LabelOptions& options) {
  options.idle.validate();
  if (options.window < -1) throw UsageError("window must be >= 0");
  PreferenceDataset ds;
  const auto labels = label_episodes(episodes, options);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& e = episodes[i];
    if (e.success) {
      for (int t = 0; t < static_cast<int>(e.steps.size()); ++t)
        ds.accepted.push_back({e.episode_id, t, make_sample(e, t, options.chunk_len)});
    } else {
      for (int t : labels[i].d_f_keys)
        ds.rejected.push_back({e.episode_id, t, make_sample(e, t, options.chunk_len)});
    }
  }
  return ds;
}

std::size_t write_labels(const std::filesystem::path& path, std::span<const EpisodeLabel> labels) {
  std::string text;
  for (const auto& l : labels) {
    json segs = json::array();
    for (const auto& s : l.segments) segs.push_back({s.start, s.end});
    text += json{{"episode_id", l.episode_id}, {"segments", segs}, {"d_f_keys", l.d_f_keys}}.dump();
    text += '\n';
  }
  write_text_file(path, text);
  return labels.size();
}

std::vector<EpisodeLabel> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<EpisodeLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EpisodeLabel l;
      j.at("episode_id").get_to(l.episode_id);
      for (const auto& s : j.at("segments")) l.segments.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
      j.at("d_f_keys").get_to(l.d_f_keys);
      out.push_back(std::move(l));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

Episode filter_small_actions(const Episode& episode, double threshold) {
  Episode out = episode;
  out.steps.clear();
  for (std::size_t i = 0; i < episode.steps.size(); ++i) {
    if (i > 0 && l2_diff(episode.steps[i].action, episode.steps[i - 1].action) < threshold) continue;
    Step s = episode.steps[i];
    s.t = static_cast<int>(out.steps.size());
    out.steps.push_back(std::move(s));
  }
  return out;
}

}  // namespace pauseflow
