#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kinema/camera.hpp"
#include "kinema/control_signal.hpp"
#include "kinema/error.hpp"
#include "kinema/image.hpp"
#include "kinema/io.hpp"
#include "kinema/kinematics.hpp"
#include "kinema/random.hpp"

namespace kinema {

// ---------------------------------------------------------------------------
// Failure synthesis

enum class FailureNoise {
  Cumulative,   // running deviation: a fresh draw is added on top each frame
  Independent,  // fresh draw per frame on the absolute pose, no accumulation
};

struct FailureSynthesisConfig {
  std::vector<double> sigmas{0.5, 0.8, 1.2};
  std::size_t segments = 3;
  std::vector<std::size_t> pose_dims{0, 1, 2, 3, 4, 5};
  std::vector<std::size_t> gripper_dims{6};
  FailureNoise noise = FailureNoise::Cumulative;
  std::uint64_t seed = 0;

  void check(std::size_t action_dim) const {
    if (sigmas.empty()) throw Error(Errc::InvalidArgument, "no noise intensities");
    for (double s : sigmas) {
      if (!(s > 0.0) || !std::isfinite(s)) throw Error(Errc::InvalidArgument, "noise intensities must be positive");
    }
    if (segments == 0) throw Error(Errc::InvalidArgument, "segment count must be positive");
    for (auto d : pose_dims) {
      if (d >= action_dim) throw Error(Errc::InvalidArgument, "pose dimension out of range");
      if (std::find(gripper_dims.begin(), gripper_dims.end(), d) != gripper_dims.end()) {
        throw Error(Errc::InvalidArgument, "dimension " + std::to_string(d) + " is both pose and gripper");
      }
    }
  }
};

struct FailureTrajectory {
  std::size_t segment = 0;
  double sigma = 0.0;
  std::size_t start_frame = 0;
  std::vector<Eigen::VectorXd> actions;
};

/// First frame of each segment: equal thirds (for 3 segments) by frame index,
/// remainder frames belong to the last segment.
inline std::vector<std::size_t> segment_starts(std::size_t frames, std::size_t segments) {
  std::vector<std::size_t> starts(segments);
  const std::size_t len = frames / segments;
  for (std::size_t s = 0; s < segments; ++s) starts[s] = s * len;
  return starts;
}

/// One failure rollout per (segment, sigma): Gaussian noise on the pose
/// dimensions from the segment start to the end, other dimensions copied.
/// Output order is segment-major; each rollout has its own random stream.
inline std::vector<FailureTrajectory> synthesize_failures(const std::vector<Eigen::VectorXd>& success,
                                                          const FailureSynthesisConfig& config) {
  if (success.empty()) throw Error(Errc::TooShort, "empty trajectory");
  const auto dim = static_cast<std::size_t>(success.front().size());
  for (const auto& a : success) {
    if (static_cast<std::size_t>(a.size()) != dim) throw Error(Errc::ShapeMismatch, "action vectors differ in size");
  }
  config.check(dim);
  if (success.size() < config.segments) {
    throw Error(Errc::TooShort, std::to_string(success.size()) + " frames for " + std::to_string(config.segments) +
                                    " segments");
  }
  const auto starts = segment_starts(success.size(), config.segments);
  std::vector<FailureTrajectory> out;
  out.reserve(config.segments * config.sigmas.size());
  for (std::size_t s = 0; s < config.segments; ++s) {
    for (std::size_t k = 0; k < config.sigmas.size(); ++k) {
      FailureTrajectory f{s, config.sigmas[k], starts[s], success};
      Rng rng = make_rng(config.seed, s * config.sigmas.size() + k);
      std::normal_distribution<double> noise(0.0, config.sigmas[k]);
      Eigen::VectorXd deviation = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
      for (std::size_t t = starts[s]; t < success.size(); ++t) {
        for (auto d : config.pose_dims) {
          const auto i = static_cast<Eigen::Index>(d);
          const double draw = noise(rng);
          deviation[i] = config.noise == FailureNoise::Cumulative ? deviation[i] + draw : draw;
          f.actions[t][i] = success[t][i] + deviation[i];
        }
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Episodes

struct Episode {
  std::string id;
  std::string source = "custom";
  std::size_t frame_count = 0;
  std::string rgb_ref;       // relative to the manifest directory
  std::string pointmap_ref;
  std::string actions_ref;
  bool success = true;
  CameraModel camera;
  std::vector<std::size_t> source_indices;  // raw frame index of every curated frame
};

struct CuratedEpisode {
  Episode meta;
  RgbSequence rgb;
  PointMapSequence pointmap;
  ActionSequence actions;
};

inline ActionSequence select_actions(const ActionSequence& actions, const std::vector<std::size_t>& indices) {
  if (const auto* ee = std::get_if<EndEffectorActions>(&actions)) {
    EndEffectorActions out = *ee;
    out.targets = select_frames(ee->targets, indices);
    if (!ee->gripper.empty()) out.gripper = select_frames(ee->gripper, indices);
    return out;
  }
  if (const auto* js = std::get_if<JointSpaceActions>(&actions)) {
    return JointSpaceActions{select_frames(js->configurations, indices)};
  }
  throw Error(Errc::InvalidArgument, "velocity actions must be integrated to joint positions before curation");
}

/// Downsamples all three streams with one shared index set.
inline CuratedEpisode curate_episode(std::string id, std::string source, const RgbSequence& rgb,
                                     const PointMapSequence& pointmap, const ActionSequence& actions, bool success,
                                     const CameraModel& camera, std::size_t target_frames = 49) {
  const std::size_t n = rgb.size();
  if (pointmap.size() != n || action_length(actions) != n) {
    throw Error(Errc::LengthMismatch, "rgb " + std::to_string(n) + ", pointmap " + std::to_string(pointmap.size()) +
                                          ", actions " + std::to_string(action_length(actions)) + " frames");
  }
  const auto indices = downsample_indices(n, target_frames);
  CuratedEpisode out;
  out.meta.id = std::move(id);
  out.meta.source = std::move(source);
  out.meta.frame_count = indices.size();
  out.meta.success = success;
  out.meta.camera = camera;
  out.meta.source_indices = indices;
  out.rgb = select_frames(rgb, indices);
  out.pointmap = select_frames(pointmap, indices);
  out.actions = select_actions(actions, indices);
  return out;
}

inline nlohmann::json to_json(const Episode& e) {
  return {{"id", e.id},
          {"source", e.source},
          {"frame_count", e.frame_count},
          {"rgb", e.rgb_ref},
          {"pointmap", e.pointmap_ref},
          {"actions", e.actions_ref},
          {"success", e.success},
          {"camera", to_json(e.camera)},
          {"source_indices", e.source_indices}};
}

inline Episode episode_from_json(const nlohmann::json& j) {
  try {
    Episode e;
    e.id = j.at("id").get<std::string>();
    e.source = j.value("source", std::string("custom"));
    e.frame_count = j.at("frame_count").get<std::size_t>();
    e.rgb_ref = j.value("rgb", std::string());
    e.pointmap_ref = j.value("pointmap", std::string());
    e.actions_ref = j.value("actions", std::string());
    e.success = j.value("success", true);
    if (j.contains("camera")) e.camera = camera_from_json(j.at("camera"));
    e.source_indices = j.value("source_indices", std::vector<std::size_t>{});
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::InvalidArgument, std::string("bad episode record: ") + ex.what());
  }
}

/// Writes <root>/<id>/{rgb.bin, pointmap.bin, pointmap.json, actions.json} and
/// returns the episode record with references relative to `root`.
inline Episode write_episode(const CuratedEpisode& episode, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path dir = root / episode.meta.id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + dir.string());
  Episode meta = episode.meta;
  meta.rgb_ref = (fs::path(meta.id) / "rgb.bin").generic_string();
  meta.pointmap_ref = (fs::path(meta.id) / "pointmap.bin").generic_string();
  meta.actions_ref = (fs::path(meta.id) / "actions.json").generic_string();
  write_rgb_tensor(root / meta.rgb_ref, episode.rgb);
  write_pointmap_tensor(root / meta.pointmap_ref, episode.pointmap);
  save_json(dir / "pointmap.json", pointmap_sidecar("pointmap.bin", meta.camera, episode.pointmap.size()));
  save_json(root / meta.actions_ref, to_json(episode.actions));
  return meta;
}

/// JSON-lines manifest; append() may be called from several workers.
class ManifestWriter {
 public:
  explicit ManifestWriter(const std::filesystem::path& path, bool truncate = true)
      : out_(path, truncate ? std::ios::trunc : std::ios::app) {
    if (!out_) throw Error(Errc::IoFailure, "cannot open manifest " + path.string());
  }

  void append(const nlohmann::json& record) {
    std::lock_guard lock(mutex_);
    out_ << record.dump() << "\n";
    out_.flush();
  }

  void append(const Episode& episode) { append(to_json(episode)); }

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

inline std::vector<Episode> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open manifest " + path.string());
  std::vector<Episode> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::IoFailure, "bad manifest line: " + std::string(e.what()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stratified split

struct Split {
  std::vector<Episode> train;
  std::vector<Episode> validation;
};

/// Per source, floor(fraction * count + 0.5) episodes go to validation,
/// sampled without replacement from a stream keyed by (seed, source).
/// Both outputs keep input order.
inline Split stratified_split(const std::vector<Episode>& episodes, const std::map<std::string, double>& fractions,
                              std::uint64_t seed, double default_fraction = 0.0) {
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < episodes.size(); ++i) by_source[episodes[i].source].push_back(i);
  std::vector<bool> to_validation(episodes.size(), false);
  for (const auto& [source, members] : by_source) {
    const auto it = fractions.find(source);
    const double fraction = it == fractions.end() ? default_fraction : it->second;
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(Errc::InvalidArgument, "split fraction outside [0, 1]");
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size()) + 0.5));
    Rng rng(derive_seed(seed, source));
    std::vector<std::size_t> chosen;
    std::sample(members.begin(), members.end(), std::back_inserter(chosen), k, rng);
    for (auto i : chosen) to_validation[i] = true;
  }
  Split out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    (to_validation[i] ? out.validation : out.train).push_back(episodes[i]);
  }
  return out;
}

}  // namespace kinema
