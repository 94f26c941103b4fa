#pragma once

// Pipeline commands behind the kinema CLI. Each command reads a RunConfig,
// writes its artifacts plus a manifest.json into the output directory and
// returns a JSON summary. Failures surface as kinema::Error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "kinema.hpp"

namespace kinema::cli {

namespace fs = std::filesystem;

struct RunConfig {
  std::string command;

  // inputs
  fs::path urdf;
  fs::path meshes;        // mesh root; defaults to the URDF's directory
  fs::path camera;
  fs::path actions;
  fs::path poses;         // link-pose file, instead of actions
  fs::path calibration;   // base -> reconstruction transform
  fs::path target;        // single IK target transform
  fs::path initial;       // IK seed configuration
  fs::path pointmap;
  fs::path mask;
  fs::path rgb;
  fs::path world;         // world image (PPM)
  fs::path input;         // curate: directory of episode directories
  fs::path pred, ref, pred_rgb, ref_rgb;
  fs::path policy_sim, policy_real;
  fs::path output;

  // pipeline options
  std::string ee_link;
  std::size_t target_frames = 49;
  bool pad_short = false;
  double soft_ratio = 0.1;
  double soft_value = 0.5;
  std::string perturb;              // kind:magnitude
  std::string export_format = "tensor";
  std::string world_mode = "zero";  // zero | robot
  bool render_rgb = false;
  int tessellation = 32;
  IkParams ik;
  double tau = 0.01;
  std::string units = "metric";
  std::string source = "custom";
  double val_fraction = 0.0;
  bool failures = false;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  json to_json() const {
    auto p = [](const fs::path& v) { return v.generic_string(); };
    return {{"command", command},
            {"urdf", p(urdf)},
            {"meshes", p(meshes)},
            {"camera", p(camera)},
            {"actions", p(actions)},
            {"poses", p(poses)},
            {"calibration", p(calibration)},
            {"target", p(target)},
            {"initial", p(initial)},
            {"pointmap", p(pointmap)},
            {"mask", p(mask)},
            {"rgb", p(rgb)},
            {"world", p(world)},
            {"input", p(input)},
            {"pred", p(pred)},
            {"ref", p(ref)},
            {"pred_rgb", p(pred_rgb)},
            {"ref_rgb", p(ref_rgb)},
            {"policy_sim", p(policy_sim)},
            {"policy_real", p(policy_real)},
            {"output", p(output)},
            {"ee_link", ee_link},
            {"target_frames", target_frames},
            {"pad_short", pad_short},
            {"soft_ratio", soft_ratio},
            {"soft_value", soft_value},
            {"perturb", perturb},
            {"export", export_format},
            {"world_mode", world_mode},
            {"rgb_render", render_rgb},
            {"tessellation", tessellation},
            {"ik_damping", ik.damping},
            {"ik_iterations", ik.max_iterations},
            {"tau", tau},
            {"units", units},
            {"source", source},
            {"val_fraction", val_fraction},
            {"failures", failures},
            {"seed", seed},
            {"jobs", jobs}};
  }
};

// Per-stage seeds, all derived from the single run seed.
inline std::uint64_t stage_seed(const RunConfig& cfg, std::string_view stage) { return derive_seed(cfg.seed, stage); }

namespace detail {

inline void require_input(const fs::path& path, const char* what) {
  if (path.empty()) throw Error(Errc::InvalidArgument, std::string("missing --") + what);
  if (!fs::exists(path)) throw Error(Errc::IoFailure, std::string(what) + " file not found: " + path.string());
}

inline fs::path prepare_output(const RunConfig& cfg) {
  if (cfg.output.empty()) throw Error(Errc::InvalidArgument, "missing --out");
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + cfg.output.string() + ": " + ec.message());
  return cfg.output;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// The only file with a timestamp; every other artifact is a pure function of config + seed.
inline void write_manifest(const RunConfig& cfg, const std::vector<std::string>& artifacts, json extra = {}) {
  json config = cfg.to_json();
  const std::string canonical = config.dump();
  json m = {{"command", cfg.command},
            {"config_hash", hex64(fnv1a64(canonical))},
            {"seed", cfg.seed},
            {"created", utc_timestamp()},
            {"config", std::move(config)},
            {"artifacts", artifacts}};
  if (!extra.is_null()) m["details"] = std::move(extra);
  save_json(cfg.output / "manifest.json", m);
}

inline RobotModel load_model(const RunConfig& cfg) {
  require_input(cfg.urdf, "urdf");
  RobotModel model = parse_urdf_file(cfg.urdf, UrdfOptions{cfg.tessellation});
  for (const auto& w : model.warnings()) spdlog::warn("{}", w);
  bool unresolved = false;
  for (const auto& link : model.links()) {
    for (const auto& v : link.visuals) unresolved |= !v.mesh;
  }
  if (unresolved) {
    const fs::path root = cfg.meshes.empty() ? cfg.urdf.parent_path() : cfg.meshes;
    model = resolve_meshes(model, directory_mesh_resolver(root));
  }
  const auto diagnostics = validate(model);
  if (!diagnostics.empty()) {
    std::string joined;
    for (const auto& d : diagnostics) {
      spdlog::error("{}", json{{"diagnostic", d.element}, {"message", d.message}}.dump());
      joined += (joined.empty() ? "" : "; ") + d.element + ": " + d.message;
    }
    throw Error(Errc::InvalidArgument, "invalid robot description: " + joined);
  }
  spdlog::info("loaded '{}': {} links, {} dof", model.name(), model.links().size(), model.dof());
  return model;
}

inline CameraModel load_camera(const RunConfig& cfg) {
  require_input(cfg.camera, "camera");
  return camera_from_json(load_json(cfg.camera));
}

inline ActionSequence load_actions(const fs::path& path) {
  require_input(path, "actions");
  return actions_from_json(load_json(path));
}

inline json ik_summary(const TrajectoryExpansion& ex) {
  std::size_t failed = 0;
  double worst_pos = 0.0, worst_rot = 0.0;
  for (const auto& r : ex.ik) {
    failed += !r.converged;
    worst_pos = std::max(worst_pos, r.position_residual);
    worst_rot = std::max(worst_rot, r.rotation_residual);
  }
  return {{"frames", ex.ik.size()},
          {"failed", failed},
          {"max_position_residual", worst_pos},
          {"max_rotation_residual", worst_rot}};
}

inline json clamps_json(const std::vector<ClampEvent>& clamps) {
  json out = json::array();
  for (const auto& c : clamps) {
    out.push_back({{"frame", c.frame}, {"dof", c.dof}, {"requested", c.requested}, {"clamped", c.clamped}});
  }
  return out;
}

/// Link poses from --poses, or by expanding --actions; calibration applied last.
inline LinkPoseSequence resolve_poses(const RunConfig& cfg, const RobotModel& model, json& details) {
  LinkPoseSequence poses;
  if (!cfg.poses.empty()) {
    require_input(cfg.poses, "poses");
    poses = link_poses_from_json(model, load_json(cfg.poses));
  } else {
    const auto ex = expand_trajectory(model, load_actions(cfg.actions), cfg.ik);
    if (!ex.ik.empty()) details["ik"] = ik_summary(ex);
    if (!ex.clamps.empty()) details["clamps"] = ex.clamps.size();
    poses = ex.poses;
  }
  if (poses.frames.empty()) throw Error(Errc::EmptySequence, "no frames to project");
  if (!cfg.calibration.empty()) {
    require_input(cfg.calibration, "calibration");
    poses = apply_base_calibration(transform_from_json(load_json(cfg.calibration)), poses);
  }
  return poses;
}

inline std::vector<OccupancyGrid> occupancy_of(const PointMapSequence& seq) {
  std::vector<OccupancyGrid> out;
  out.reserve(seq.size());
  for (const auto& f : seq) out.push_back(f.valid);
  return out;
}

inline std::vector<bool> load_flags(const fs::path& path) {
  require_input(path, "policy");
  const json j = load_json(path);
  const json& arr = j.is_object() ? j.at("success") : j;
  if (!arr.is_array()) throw Error(Errc::InvalidArgument, path.string() + ": expected an array of outcomes");
  std::vector<bool> flags;
  for (const auto& v : arr) {
    if (v.is_boolean()) {
      flags.push_back(v.get<bool>());
    } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
      flags.push_back(v.get<int>() == 1);
    } else {
      throw Error(Errc::InvalidArgument, path.string() + ": outcomes must be booleans or 0/1");
    }
  }
  return flags;
}

/// Maps valid coordinates with fixed extrema (used to put prediction and
/// reference into the reference's normalized frame).
inline PointMapSequence normalize_with(const PointMapSequence& seq, double lo, double hi) {
  PointMapSequence out = seq;
  const double range = hi - lo;
  for (auto& f : out) {
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
      if (!f.valid[i]) continue;
      for (int c = 0; c < 3; ++c) {
        f.coords[i][c] = static_cast<float>(range > 0.0 ? (f.coords[i][c] - lo) / range : 0.5);
      }
    }
  }
  return out;
}

}  // namespace detail

/// fk: actions -> joint trace and link poses.
inline json cmd_fk(const RunConfig& cfg) {
  const RobotModel model = detail::load_model(cfg);
  const auto actions = detail::load_actions(cfg.actions);
  const fs::path out = detail::prepare_output(cfg);
  const auto ex = expand_trajectory(model, actions, cfg.ik);
  json trace = joint_trace_to_json(model, ex.joints);
  if (!ex.gripper.empty()) trace["gripper"] = ex.gripper;
  save_json(out / "joints.json", trace);
  save_json(out / "link_poses.json", to_json(model, ex.poses));
  std::vector<std::string> artifacts{"joints.json", "link_poses.json"};
  json details = {{"frames", ex.joints.size()}, {"clamps", detail::clamps_json(ex.clamps)}};
  if (!ex.ik.empty()) {
    json frames = json::array();
    for (const auto& r : ex.ik) {
      frames.push_back({{"converged", r.converged},
                        {"position_residual", r.position_residual},
                        {"rotation_residual", r.rotation_residual},
                        {"iterations", r.iterations}});
    }
    save_json(out / "ik_report.json", {{"summary", detail::ik_summary(ex)}, {"frames", frames}});
    artifacts.push_back("ik_report.json");
    details["ik"] = detail::ik_summary(ex);
    if (details["ik"]["failed"].get<std::size_t>() > 0) {
      spdlog::warn("IK did not converge on {} of {} frames", details["ik"]["failed"].get<std::size_t>(), ex.ik.size());
    }
  }
  if (!ex.clamps.empty()) spdlog::warn("{} joint values clamped to limits", ex.clamps.size());
  detail::write_manifest(cfg, artifacts, details);
  return details;
}

/// ik: one target pose -> joint configuration.
inline json cmd_ik(const RunConfig& cfg) {
  const RobotModel model = detail::load_model(cfg);
  detail::require_input(cfg.target, "target");
  const RigidTransform target = transform_from_json(load_json(cfg.target));
  if (cfg.ee_link.empty()) throw Error(Errc::InvalidArgument, "missing --ee-link");
  JointConfiguration seed = default_seed(model);
  if (!cfg.initial.empty()) {
    detail::require_input(cfg.initial, "initial");
    seed = vector_from_json(load_json(cfg.initial));
  }
  const fs::path out = detail::prepare_output(cfg);
  const IkResult res = inverse_kinematics(model, cfg.ee_link, target, seed, cfg.ik);
  json result = {{"joint_names", model.actuated_order()},
                 {"q", vector_to_json(res.q)},
                 {"converged", res.converged},
                 {"position_residual", res.position_residual},
                 {"rotation_residual", res.rotation_residual},
                 {"iterations", res.iterations}};
  save_json(out / "ik.json", result);
  if (!res.converged) spdlog::warn("IK did not converge; best residual {} m / {} rad", res.position_residual,
                                   res.rotation_residual);
  detail::write_manifest(cfg, {"ik.json"});
  return result;
}

/// project: link poses -> pointmap tensor, soft mask, optional RGB.
inline json cmd_project(const RunConfig& cfg) {
  const RobotModel model = detail::load_model(cfg);
  const CameraModel camera = detail::load_camera(cfg);
  json details = json::object();
  const LinkPoseSequence poses = detail::resolve_poses(cfg, model, details);
  const fs::path out = detail::prepare_output(cfg);

  RenderedSequence<float> rendered = render_sequence(model, poses, camera, cfg.render_rgb, cfg.jobs);
  PointMapSequence pointmaps = std::move(rendered.pointmaps);
  std::size_t baseline_valid = 0;
  for (const auto& f : pointmaps) baseline_valid += f.valid_count();
  if (!cfg.perturb.empty()) {
    const auto spec = PerturbationSpec::parse(cfg.perturb, stage_seed(cfg, "perturb"));
    pointmaps = kinema::perturb(pointmaps, spec, cfg.jobs);
  }
  std::size_t valid = 0;
  for (const auto& f : pointmaps) valid += f.valid_count();
  // the mask follows the (possibly perturbed) pointmap support
  const auto masks = soft_mask(detail::occupancy_of(pointmaps),
                               {cfg.soft_ratio, static_cast<float>(cfg.soft_value)}, stage_seed(cfg, "soft_mask"),
                               cfg.jobs);

  write_pointmap_tensor(out / "pointmap.bin", pointmaps);
  save_json(out / "pointmap.json", pointmap_sidecar("pointmap.bin", camera, pointmaps.size()));
  write_mask_tensor(out / "mask.bin", masks);
  std::vector<std::string> artifacts{"pointmap.bin", "pointmap.json", "mask.bin"};
  if (cfg.render_rgb) {
    write_rgb_tensor(out / "rgb.bin", rendered.rgb);
    artifacts.push_back("rgb.bin");
  }
  details["frames"] = pointmaps.size();
  details["height"] = camera.height;
  details["width"] = camera.width;
  details["valid_pixels"] = valid;
  details["valid_pixels_before_perturbation"] = baseline_valid;
  spdlog::info("projected {} frames at {}x{}, {} valid pixels", pointmaps.size(), camera.height, camera.width, valid);
  detail::write_manifest(cfg, artifacts, details);
  return details;
}

/// signal: pointmap (+ mask, world image) -> downsampled, normalized conditioning sequence.
inline json cmd_signal(const RunConfig& cfg) {
  detail::require_input(cfg.pointmap, "pointmap");
  const PointMapSequence raw = read_pointmap_tensor(cfg.pointmap);
  if (cfg.export_format != "tensor" && cfg.export_format != "pseudo_rgb" && cfg.export_format != "both") {
    throw Error(Errc::InvalidArgument, "--export must be tensor, pseudo_rgb or both");
  }
  const fs::path out = detail::prepare_output(cfg);
  const auto indices = downsample_indices(raw.size(), cfg.target_frames, cfg.pad_short);
  const auto normalized = normalize_sequence(select_frames(raw, indices));
  std::vector<std::string> artifacts;
  if (cfg.export_format != "pseudo_rgb") {
    write_pointmap_tensor(out / "signal.bin", normalized.frames);
    artifacts.push_back("signal.bin");
  }
  if (cfg.export_format != "tensor") {
    export_pseudo_rgb(normalized, out / "pseudo_rgb");
    artifacts.push_back("pseudo_rgb/");
  }
  save_json(out / "signal.json", {{"min", normalized.min},
                                  {"max", normalized.max},
                                  {"degenerate", normalized.degenerate},
                                  {"source_frames", raw.size()},
                                  {"source_indices", indices}});
  artifacts.push_back("signal.json");
  if (!cfg.mask.empty()) {
    detail::require_input(cfg.mask, "mask");
    write_mask_tensor(out / "mask.bin", select_frames(read_mask_tensor(cfg.mask), indices));
    artifacts.push_back("mask.bin");
  }
  if (!cfg.world.empty()) {
    detail::require_input(cfg.world, "world");
    const RgbFrame world = from_rgb8(read_ppm(cfg.world));
    RgbSequence extended;
    if (cfg.world_mode == "zero") {
      extended = extend_world_image(world, indices.size(), WorldExtension::ZeroPad);
    } else if (cfg.world_mode == "robot") {
      detail::require_input(cfg.rgb, "rgb");
      const auto robot = select_frames(read_rgb_tensor(cfg.rgb), indices);
      extended = extend_world_image(world, indices.size(), WorldExtension::RobotRgb, &robot);
    } else {
      throw Error(Errc::InvalidArgument, "--world-mode must be zero or robot");
    }
    write_rgb_tensor(out / "condition.bin", concat_width(extended, normalized));
    artifacts.push_back("condition.bin");
  }
  json details = {{"frames", indices.size()}, {"degenerate", normalized.degenerate}};
  detail::write_manifest(cfg, artifacts, details);
  return details;
}

/// perturb: pointmap -> perturbed pointmap.
inline json cmd_perturb(const RunConfig& cfg) {
  detail::require_input(cfg.pointmap, "pointmap");
  if (cfg.perturb.empty()) throw Error(Errc::InvalidArgument, "missing --perturb");
  const auto spec = PerturbationSpec::parse(cfg.perturb, stage_seed(cfg, "perturb"));
  const PointMapSequence in = read_pointmap_tensor(cfg.pointmap);
  const fs::path out = detail::prepare_output(cfg);
  const PointMapSequence perturbed = kinema::perturb(in, spec, cfg.jobs);
  write_pointmap_tensor(out / "pointmap.bin", perturbed);
  std::size_t before = 0, after = 0;
  for (const auto& f : in) before += f.valid_count();
  for (const auto& f : perturbed) after += f.valid_count();
  json details = {{"frames", perturbed.size()}, {"valid_pixels_before", before}, {"valid_pixels_after", after}};
  detail::write_manifest(cfg, {"pointmap.bin"}, details);
  return details;
}

namespace detail {

/// Flattens actions into per-frame vectors for failure synthesis:
/// end-effector frames become [x y z roll pitch yaw (gripper)].
inline std::pair<std::vector<Eigen::VectorXd>, FailureSynthesisConfig> failure_inputs(const ActionSequence& actions) {
  FailureSynthesisConfig fc;
  std::vector<Eigen::VectorXd> vectors;
  if (const auto* ee = std::get_if<EndEffectorActions>(&actions)) {
    const bool grip = !ee->gripper.empty();
    for (std::size_t t = 0; t < ee->targets.size(); ++t) {
      Eigen::VectorXd v(grip ? 7 : 6);
      v.head<3>() = ee->targets[t].translation;
      v.segment<3>(3) = ee->targets[t].rpy();
      if (grip) v[6] = ee->gripper[t];
      vectors.push_back(v);
    }
    if (!grip) fc.gripper_dims.clear();
  } else if (const auto* js = std::get_if<JointSpaceActions>(&actions)) {
    vectors = js->configurations;
    const auto dim = vectors.empty() ? 0 : static_cast<std::size_t>(vectors.front().size());
    fc.pose_dims.clear();
    for (std::size_t d = 0; d < dim; ++d) fc.pose_dims.push_back(d);
    fc.gripper_dims.clear();
  } else {
    throw Error(Errc::InvalidArgument, "failure synthesis needs position or pose actions");
  }
  return {vectors, fc};
}

}  // namespace detail

/// curate: directory of raw episodes -> fixed-length episodes + JSON-lines manifest.
inline json cmd_curate(const RunConfig& cfg) {
  detail::require_input(cfg.input, "input");
  const fs::path out = detail::prepare_output(cfg);
  std::optional<CameraModel> default_camera;
  if (!cfg.camera.empty()) default_camera = detail::load_camera(cfg);

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(cfg.input)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  struct Outcome {
    std::optional<Episode> episode;
    std::string error_code;
    std::string error;
  };
  std::vector<Outcome> outcomes(dirs.size());
  parallel_for(dirs.size(), cfg.jobs, [&](std::size_t i) {
    const fs::path& dir = dirs[i];
    const std::string id = dir.filename().string();
    try {
      json meta = fs::exists(dir / "episode.json") ? load_json(dir / "episode.json") : json::object();
      CameraModel camera;
      if (meta.contains("camera")) {
        camera = camera_from_json(meta.at("camera"));
      } else if (default_camera) {
        camera = *default_camera;
      } else {
        throw Error(Errc::InvalidCamera, "no camera in episode.json and no --camera given");
      }
      const auto rgb = read_rgb_tensor(dir / "rgb.bin");
      const auto pm = read_pointmap_tensor(dir / "pointmap.bin");
      const auto actions = detail::load_actions(dir / "actions.json");
      const auto episode = curate_episode(id, meta.value("source", cfg.source), rgb, pm, actions,
                                          meta.value("success", true), camera, cfg.target_frames);
      Episode written = write_episode(episode, out);
      if (cfg.failures) {
        auto [vectors, fc] = detail::failure_inputs(episode.actions);
        fc.seed = derive_seed(stage_seed(cfg, "failures"), id);
        json list = json::array();
        for (const auto& f : synthesize_failures(vectors, fc)) {
          json frames = json::array();
          for (const auto& a : f.actions) frames.push_back(vector_to_json(a));
          list.push_back({{"segment", f.segment}, {"sigma", f.sigma}, {"start_frame", f.start_frame},
                          {"actions", std::move(frames)}});
        }
        save_json(out / id / "failures.json", {{"noise", "cumulative"}, {"trajectories", std::move(list)}});
      }
      outcomes[i].episode = std::move(written);
    } catch (const Error& e) {
      outcomes[i].error_code = to_string(e.code());
      outcomes[i].error = e.what();
    }
  });

  // one writer, input order: manifests are reproducible whatever the schedule
  std::vector<Episode> episodes;
  std::size_t failed = 0;
  {
    ManifestWriter manifest(out / "manifest.jsonl");
    ManifestWriter errors(out / "errors.jsonl");
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      if (outcomes[i].episode) {
        manifest.append(*outcomes[i].episode);
        episodes.push_back(*outcomes[i].episode);
      } else {
        ++failed;
        spdlog::warn("episode {}: {}", dirs[i].filename().string(), outcomes[i].error);
        errors.append(json{{"id", dirs[i].filename().string()},
                           {"error", outcomes[i].error_code},
                           {"message", outcomes[i].error}});
      }
    }
  }
  std::vector<std::string> artifacts{"manifest.jsonl", "errors.jsonl"};
  if (cfg.val_fraction > 0.0) {
    const auto split = stratified_split(episodes, {}, stage_seed(cfg, "split"), cfg.val_fraction);
    ManifestWriter train(out / "train.jsonl");
    ManifestWriter val(out / "validation.jsonl");
    for (const auto& e : split.train) train.append(e);
    for (const auto& e : split.validation) val.append(e);
    artifacts.push_back("train.jsonl");
    artifacts.push_back("validation.jsonl");
  }
  json details = {{"episodes", episodes.size()}, {"failed", failed}};
  detail::write_manifest(cfg, artifacts, details);
  return details;
}

/// eval: prediction vs reference artifacts -> MetricReport.
inline MetricReport evaluate(const RunConfig& cfg) {
  MetricReport report;
  report.fscore_tau = cfg.tau;
  if (cfg.units != "metric" && cfg.units != "normalized") {
    throw Error(Errc::InvalidArgument, "--units must be metric or normalized");
  }
  report.units = cfg.units == "metric" ? Units::Metric : Units::Normalized;
  if (!cfg.pred.empty() || !cfg.ref.empty()) {
    detail::require_input(cfg.pred, "pred");
    detail::require_input(cfg.ref, "ref");
    PointMapSequence pred = read_pointmap_tensor(cfg.pred);
    PointMapSequence ref = read_pointmap_tensor(cfg.ref);
    if (report.units == Units::Normalized) {
      const auto n = normalize_sequence(ref);
      pred = detail::normalize_with(pred, n.min, n.max);
      ref = n.frames;
    }
    const std::pair<const char*, CloudMetric> metrics[] = {
        {"cd_l1", CloudMetric::ChamferL1}, {"cd_l2", CloudMetric::ChamferL2}, {"fscore", CloudMetric::FScore}};
    for (const auto& [key, metric] : metrics) {
      std::vector<double> per_frame;
      report.set(key, sequence_metric(pred, ref, metric, cfg.tau, &per_frame));
      report.per_frame[key] = std::move(per_frame);
      if (pred.size() >= 2) {
        report.set(std::string(key) + "_temp", temporal_metric(pred, metric, cfg.tau));
      }
    }
    if (pred.size() < 2) spdlog::warn("single-frame prediction: temporal metrics skipped");
  }
  if (!cfg.pred_rgb.empty() || !cfg.ref_rgb.empty()) {
    detail::require_input(cfg.pred_rgb, "pred-rgb");
    detail::require_input(cfg.ref_rgb, "ref-rgb");
    const auto a = read_rgb_tensor(cfg.pred_rgb);
    const auto b = read_rgb_tensor(cfg.ref_rgb);
    report.set("psnr", psnr(a, b));
    report.set("ssim", ssim(a, b));
  }
  if (!cfg.policy_sim.empty() || !cfg.policy_real.empty()) {
    const auto d = success_rate_diff(detail::load_flags(cfg.policy_sim), detail::load_flags(cfg.policy_real));
    report.set("success_sim", d.rate_sim);
    report.set("success_real", d.rate_real);
    report.set("diff", d.diff);
  }
  if (report.scalars.empty()) {
    throw Error(Errc::InvalidArgument, "nothing to evaluate: give --pred/--ref, --pred-rgb/--ref-rgb or --policy");
  }
  return report;
}

inline MetricReport cmd_eval(const RunConfig& cfg) {
  const MetricReport report = evaluate(cfg);
  if (!cfg.output.empty()) {
    detail::prepare_output(cfg);
    save_json(cfg.output / "report.json", report.to_json());
    std::ofstream table(cfg.output / "report.txt");
    table << report.table();
    detail::write_manifest(cfg, {"report.json", "report.txt"});
  }
  return report;
}

}  // namespace kinema::cli
