#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

using kinema::cli::RunConfig;
using nlohmann::json;

// Reads --config files as JSON objects. Top-level keys apply to the selected
// subcommand; a nested object named after a subcommand applies to it alone.
// Keys may use underscores or dashes. Command-line flags take precedence.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::string active;
    for (const auto* sub : root_->get_subcommands()) active = sub->get_name();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        if (key != active) continue;
        for (const auto& [k, v] : value.items()) items.push_back(item(key, k, v));
      } else if (!active.empty()) {
        items.push_back(item(active, key, value));
      }
    }
    return items;
  }

 private:
  static CLI::ConfigItem item(const std::string& parent, std::string key, const json& value) {
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::ConfigItem it;
    it.parents = {parent};
    it.name = key;
    auto text = [&](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number() || v.is_null()) return v.dump();
      throw CLI::ConfigError("config key '" + key + "' must be a scalar or an array of scalars");
    };
    if (value.is_array()) {
      for (const auto& v : value) it.inputs.push_back(text(v));
    } else {
      it.inputs.push_back(text(value));
    }
    return it;
  }

  const CLI::App* root_;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("kinema");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("KINEMA_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"
    if (level != spdlog::level::off || std::string(env) == "off") {
      spdlog::set_level(level);
    } else {
      spdlog::warn("KINEMA_LOG='{}' not recognised; using 'warn'", env);
    }
  }
}

void print_error(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("-o,--out", cfg.output, "Output directory");
  sub->add_option("--seed", cfg.seed, "Run seed; every stochastic stage derives its stream from it");
  sub->add_option("-j,--jobs", cfg.jobs, "Worker threads")->check(CLI::Range(1u, 256u));
}

void add_model(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--urdf", cfg.urdf, "Robot description (URDF)");
  sub->add_option("--meshes", cfg.meshes, "Mesh root for relative and package:// paths");
  sub->add_option("--tessellation", cfg.tessellation, "Segments for cylinders and spheres")
      ->check(CLI::Range(3, 1024));
}

void add_ik(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--ik-damping", cfg.ik.damping, "Damped least squares lambda")->check(CLI::PositiveNumber);
  sub->add_option("--ik-iterations", cfg.ik.max_iterations, "IK iteration cap")->check(CLI::Range(1, 100000));
  sub->add_option("--ik-pos-tol", cfg.ik.position_tolerance, "IK position tolerance [m]")
      ->check(CLI::PositiveNumber);
  sub->add_option("--ik-rot-tol", cfg.ik.rotation_tolerance, "IK rotation tolerance [rad]")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  RunConfig cfg;
  CLI::App app{"Kinematics-grounded pointmap rendering, control signals, curation and evaluation"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file with option values; flags given on the command line win");
  app.allow_config_extras(CLI::config_extras_mode::ignore);
  std::string log_level;
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | critical | off (overrides KINEMA_LOG)")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  // each handler returns the text printed on success
  std::map<std::string, std::function<std::string(const RunConfig&)>> handlers;
  auto command = [&](const std::string& name, const std::string& help, auto fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->allow_config_extras(CLI::config_extras_mode::ignore);
    handlers[name] = [fn](const RunConfig& c) {
      const auto result = fn(c);
      if constexpr (std::is_same_v<std::decay_t<decltype(result)>, kinema::MetricReport>) {
        return result.table();
      } else {
        return result.dump(2) + "\n";
      }
    };
    add_common(sub, cfg);
    return sub;
  };

  auto* fk = command("fk", "Expand actions to joint trajectories and link poses", kinema::cli::cmd_fk);
  add_model(fk, cfg);
  add_ik(fk, cfg);
  fk->add_option("--actions", cfg.actions, "Action sequence (JSON)");

  auto* ik = command("ik", "Solve one end-effector target", kinema::cli::cmd_ik);
  add_model(ik, cfg);
  add_ik(ik, cfg);
  ik->add_option("--target", cfg.target, "Target transform (JSON)");
  ik->add_option("--ee-link", cfg.ee_link, "End-effector link");
  ik->add_option("--initial", cfg.initial, "Seed configuration (JSON array)");

  auto* project = command("project", "Render pointmaps and soft masks from actions or link poses",
                          kinema::cli::cmd_project);
  add_model(project, cfg);
  add_ik(project, cfg);
  project->add_option("--camera", cfg.camera, "Camera intrinsics and extrinsics (JSON)");
  project->add_option("--actions", cfg.actions, "Action sequence (JSON)");
  project->add_option("--poses", cfg.poses, "Link poses per frame (JSON), instead of --actions");
  project->add_option("--calibration", cfg.calibration, "Robot base to reconstruction frame transform (JSON)");
  project->add_option("--soft-ratio", cfg.soft_ratio, "Fraction of occupied pixels given the soft value")
      ->check(CLI::Range(0.0, 1.0));
  project->add_option("--soft-value", cfg.soft_value, "Soft mask value")->check(CLI::Range(0.0, 1.0));
  project->add_option("--perturb", cfg.perturb, "remove:F | gaussian:S | translate:DU,DV | rotate:DEG");
  project->add_flag("--rgb", cfg.render_rgb, "Also render a flat-shaded RGB sequence");

  auto* signal = command("signal", "Downsample and normalize a pointmap into a conditioning signal",
                         kinema::cli::cmd_signal);
  signal->add_option("--pointmap", cfg.pointmap, "Pointmap tensor");
  signal->add_option("--mask", cfg.mask, "Mask tensor to downsample alongside");
  signal->add_option("--world", cfg.world, "World image (PPM) for the conditioning sequence");
  signal->add_option("--world-mode", cfg.world_mode, "zero | robot")->check(CLI::IsMember({"zero", "robot"}));
  signal->add_option("--rgb", cfg.rgb, "Robot RGB tensor, for --world-mode robot");
  signal->add_option("--frames", cfg.target_frames, "Output frame count")->check(CLI::Range(1, 100000));
  signal->add_flag("--pad-short", cfg.pad_short, "Repeat the last frame when the input is too short");
  signal->add_option("--export", cfg.export_format, "tensor | pseudo_rgb | both")
      ->check(CLI::IsMember({"tensor", "pseudo_rgb", "both"}));

  auto* perturb = command("perturb", "Apply a pointmap perturbation", kinema::cli::cmd_perturb);
  perturb->add_option("--pointmap", cfg.pointmap, "Pointmap tensor");
  perturb->add_option("--perturb,--kind", cfg.perturb, "remove:F | gaussian:S | translate:DU,DV | rotate:DEG");

  auto* curate = command("curate", "Curate raw episodes into fixed-length training records", kinema::cli::cmd_curate);
  curate->add_option("-i,--input", cfg.input, "Directory of episode directories");
  curate->add_option("--camera", cfg.camera, "Camera for episodes without one in episode.json");
  curate->add_option("--frames", cfg.target_frames, "Frames per curated episode")->check(CLI::Range(1, 100000));
  curate->add_option("--source", cfg.source, "Source tag for episodes without one");
  curate->add_option("--val-fraction", cfg.val_fraction, "Per-source validation fraction")
      ->check(CLI::Range(0.0, 1.0));
  curate->add_flag("--failures", cfg.failures, "Synthesize failure rollouts for every episode");

  auto* eval = command("eval", "Evaluate predictions against references", kinema::cli::cmd_eval);
  eval->add_option("--pred", cfg.pred, "Predicted pointmap tensor");
  eval->add_option("--ref", cfg.ref, "Reference pointmap tensor");
  eval->add_option("--pred-rgb", cfg.pred_rgb, "Predicted RGB tensor");
  eval->add_option("--ref-rgb", cfg.ref_rgb, "Reference RGB tensor");
  eval->add_option("--policy-sim", cfg.policy_sim, "Policy outcomes in simulation (JSON)");
  eval->add_option("--policy-real", cfg.policy_real, "Policy outcomes in the real world (JSON)");
  std::vector<std::string> policy_pair;
  eval->add_option("--policy", policy_pair, "Simulation and real-world outcome files, in that order")
      ->expected(2)
      ->excludes("--policy-sim")
      ->excludes("--policy-real");
  eval->add_option("--tau", cfg.tau, "F-score threshold")->check(CLI::PositiveNumber);
  eval->add_option("--units", cfg.units, "metric | normalized")->check(CLI::IsMember({"metric", "normalized"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    std::cerr << "run 'kinema --help' for usage\n";
    return 1;
  }

  if (!log_level.empty()) spdlog::set_level(spdlog::level::from_str(log_level));
  if (policy_pair.size() == 2) {
    cfg.policy_sim = policy_pair[0];
    cfg.policy_real = policy_pair[1];
  }
  const std::string name = app.get_subcommands().front()->get_name();
  cfg.command = name;
  try {
    std::cout << handlers.at(name)(cfg);
    return 0;
  } catch (const kinema::Error& e) {
    print_error(kinema::to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 3;
  }
}
