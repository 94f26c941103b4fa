#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>
#include <thread>

#include "fixtures.hpp"

using namespace kinema;
using namespace kinema::testing;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoFailure;
}

std::vector<Eigen::VectorXd> demo_actions(std::size_t frames) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t t = 0; t < frames; ++t) {
    Eigen::VectorXd a(7);
    a << 0.4 + 0.001 * t, -0.1, 0.3 - 0.002 * t, 0.0, 3.14, 0.1 * t, t < frames / 2 ? 1.0 : 0.0;
    out.push_back(a);
  }
  return out;
}

}  // namespace

TEST_CASE("default failure synthesis yields nine rollouts, gripper untouched") {
  const auto success = demo_actions(49);
  const auto fails = synthesize_failures(success, {});
  REQUIRE(fails.size() == 9);
  const std::vector<std::size_t> starts{0, 16, 32};
  for (std::size_t k = 0; k < 9; ++k) {
    const auto& f = fails[k];
    CHECK(f.segment == k / 3);
    CHECK(f.sigma == std::vector<double>{0.5, 0.8, 1.2}[k % 3]);
    CHECK(f.start_frame == starts[f.segment]);
    REQUIRE(f.actions.size() == 49);
    for (std::size_t t = 0; t < 49; ++t) {
      CHECK(f.actions[t][6] == success[t][6]);
      if (t < f.start_frame) {
        CHECK(f.actions[t] == success[t]);
      } else {
        for (int d = 0; d < 6; ++d) CHECK(f.actions[t][d] != success[t][d]);
      }
    }
  }
}

TEST_CASE("segment boundaries are equal thirds with the remainder last") {
  CHECK(segment_starts(50, 3) == std::vector<std::size_t>{0, 16, 32});
  CHECK(segment_starts(9, 3) == std::vector<std::size_t>{0, 3, 6});
  CHECK(segment_starts(10, 4) == std::vector<std::size_t>{0, 2, 4, 6});
}

TEST_CASE("cumulative noise is a random walk, independent noise is not") {
  const auto success = demo_actions(3000);
  FailureSynthesisConfig cfg;
  cfg.sigmas = {0.5};
  cfg.segments = 1;
  cfg.seed = 42;
  auto stats = [&](FailureNoise mode) {
    cfg.noise = mode;
    const auto f = synthesize_failures(success, cfg).front();
    double step_sq = 0.0, level_sq = 0.0;
    for (std::size_t t = 1; t < success.size(); ++t) {
      const double d = f.actions[t][0] - success[t][0];
      const double prev = f.actions[t - 1][0] - success[t - 1][0];
      step_sq += (d - prev) * (d - prev);
      level_sq += d * d;
    }
    const double n = static_cast<double>(success.size() - 1);
    return std::pair{std::sqrt(step_sq / n), std::sqrt(level_sq / n)};
  };
  const auto [walk_step, walk_level] = stats(FailureNoise::Cumulative);
  CHECK(walk_step == Catch::Approx(0.5).epsilon(0.06));
  CHECK(walk_level > 5.0);
  const auto [iid_step, iid_level] = stats(FailureNoise::Independent);
  CHECK(iid_level == Catch::Approx(0.5).epsilon(0.06));
  CHECK(iid_step == Catch::Approx(0.5 * std::sqrt(2.0)).epsilon(0.06));
}

TEST_CASE("failure synthesis is reproducible and seed-sensitive") {
  const auto success = demo_actions(49);
  FailureSynthesisConfig cfg;
  cfg.seed = 1;
  const auto a = synthesize_failures(success, cfg);
  const auto b = synthesize_failures(success, cfg);
  cfg.seed = 2;
  const auto c = synthesize_failures(success, cfg);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].actions == b[k].actions);
    CHECK_FALSE(a[k].actions == c[k].actions);
  }
}

TEST_CASE("failure synthesis argument checks") {
  const auto success = demo_actions(49);
  FailureSynthesisConfig cfg;
  cfg.gripper_dims = {5};
  CHECK(code_of([&] { synthesize_failures(success, cfg); }) == Errc::InvalidArgument);
  cfg = {};
  cfg.sigmas = {0.5, -1.0};
  CHECK(code_of([&] { synthesize_failures(success, cfg); }) == Errc::InvalidArgument);
  cfg = {};
  cfg.pose_dims = {9};
  CHECK(code_of([&] { synthesize_failures(success, cfg); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { synthesize_failures(demo_actions(2), {}); }) == Errc::TooShort);
}

TEST_CASE("curation applies one index set to every stream") {
  const auto cam = toy_camera(8, 6);
  const std::size_t T = 97;
  RgbSequence rgb;
  PointMapSequence pm;
  JointSpaceActions js;
  for (std::size_t t = 0; t < T; ++t) {
    rgb.emplace_back(6, 8, Rgb::Constant(float(t) / T));
    PointMapFrame f(6, 8);
    f.valid(0, 0) = 1;
    f.coords(0, 0) = Eigen::Vector3f(float(t), 0, 1);
    pm.push_back(f);
    js.configurations.push_back(Eigen::VectorXd::Constant(2, double(t)));
  }
  const auto ep = curate_episode("ep0", "bridge", rgb, pm, js, true, cam);
  REQUIRE(ep.meta.frame_count == 49);
  const auto& q = std::get<JointSpaceActions>(ep.actions).configurations;
  for (std::size_t i = 0; i < 49; ++i) {
    const auto src = ep.meta.source_indices[i];
    CHECK(src == i * (T - 1) / 48);
    CHECK(ep.rgb[i] == rgb[src]);
    CHECK(ep.pointmap[i].coords(0, 0).x() == float(src));
    CHECK(q[i][0] == double(src));
  }
  pm.pop_back();
  CHECK(code_of([&] { curate_episode("x", "s", rgb, pm, js, true, cam); }) == Errc::LengthMismatch);
  const JointVelocityActions jv{std::vector<JointConfiguration>(T, Eigen::VectorXd::Zero(2)), 0.1,
                                Eigen::VectorXd::Zero(2)};
  pm.push_back(pm.back());
  CHECK(code_of([&] { curate_episode("x", "s", rgb, pm, jv, true, cam); }) == Errc::InvalidArgument);
}

TEST_CASE("episodes and manifests round-trip through disk") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "kinema_curation";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cam = toy_camera(4, 3);
  RgbSequence rgb(60, RgbFrame(3, 4, Rgb(0.25f, 0.5f, 0.75f)));
  PointMapSequence pm(60, PointMapFrame(3, 4));
  pm[59].valid(1, 1) = 1;
  pm[59].coords(1, 1) = Eigen::Vector3f(1, 2, 3);
  JointSpaceActions js{std::vector<JointConfiguration>(60, Eigen::VectorXd::Ones(3))};
  const auto ep = curate_episode("ep7", "droid", rgb, pm, js, false, cam);
  const auto meta = write_episode(ep, root);
  CHECK(meta.pointmap_ref == "ep7/pointmap.bin");
  const auto back_pm = read_pointmap_tensor(root / meta.pointmap_ref);
  REQUIRE(back_pm.size() == 49);
  CHECK(back_pm[48].coords(1, 1) == Eigen::Vector3f(1, 2, 3));
  CHECK(back_pm[48].valid == pm[59].valid);
  CHECK(read_rgb_tensor(root / meta.rgb_ref)[10] == rgb[0]);

  {
    ManifestWriter writer(root / "manifest.jsonl");
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w) {
      workers.emplace_back([&, w] {
        for (int k = 0; k < 25; ++k) {
          Episode e = meta;
          e.id = "w" + std::to_string(w) + "_" + std::to_string(k);
          writer.append(e);
        }
      });
    }
    for (auto& t : workers) t.join();
  }
  const auto records = read_manifest(root / "manifest.jsonl");
  REQUIRE(records.size() == 100);
  std::set<std::string> ids;
  for (const auto& r : records) {
    ids.insert(r.id);
    CHECK(r.source == "droid");
    CHECK_FALSE(r.success);
    CHECK(r.source_indices == ep.meta.source_indices);
    CHECK(r.camera.fx == cam.fx);
  }
  CHECK(ids.size() == 100);
  fs::remove_all(root);
}

TEST_CASE("stratified split takes round(f n) per source, reproducibly") {
  std::vector<Episode> eps;
  const std::map<std::string, int> counts{{"bridge", 41}, {"droid", 10}, {"rt1", 7}};
  for (const auto& [src, n] : counts) {
    for (int i = 0; i < n; ++i) {
      Episode e;
      e.id = src + std::to_string(i);
      e.source = src;
      eps.push_back(e);
    }
  }
  const std::map<std::string, double> fractions{{"bridge", 0.1}, {"droid", 0.25}};
  const auto split = stratified_split(eps, fractions, 9);
  std::map<std::string, int> val;
  for (const auto& e : split.validation) ++val[e.source];
  CHECK(val["bridge"] == 4);
  CHECK(val["droid"] == 3);  // 2.5 rounds up
  CHECK(val["rt1"] == 0);
  CHECK(split.train.size() + split.validation.size() == eps.size());
  const auto again = stratified_split(eps, fractions, 9);
  REQUIRE(again.validation.size() == split.validation.size());
  for (std::size_t i = 0; i < split.validation.size(); ++i) CHECK(again.validation[i].id == split.validation[i].id);
  CHECK(stratified_split(eps, {}, 9, 0.5).validation.size() == 21 + 5 + 4);
  CHECK(code_of([&] { stratified_split(eps, {{"rt1", 1.5}}, 9); }) == Errc::InvalidArgument);
}
