#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace kinema;
using namespace kinema::testing;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd q(2);
  q << a, b;
  return q;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoFailure;
}

}  // namespace

TEST_CASE("planar arm matches closed-form positions") {
  const auto model = parse_urdf(planar_2r_urdf());
  const auto tip = model.link_index("tip");
  const auto up = forward_kinematics(model, vec2(std::numbers::pi / 2, 0.0))[tip];
  CHECK((up.translation - Eigen::Vector3d(0, 2, 0)).cwiseAbs().maxCoeff() <= 1e-12);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng);
    const auto p = forward_kinematics(model, vec2(a, b))[tip].translation;
    const Eigen::Vector3d expected(std::cos(a) + std::cos(a + b), std::sin(a) + std::sin(a + b), 0.0);
    CHECK((p - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("random trees agree with naive matrix composition") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const auto tree = random_tree(rng);
    const auto model = parse_urdf(tree.urdf());
    Eigen::VectorXd q(static_cast<Eigen::Index>(tree.dof()));
    for (auto& v : q) v = u(rng);
    const auto poses = forward_kinematics(model, q);
    const auto expected = oracle::tree_fk(tree, q);
    for (int l = 0; l < tree.link_count; ++l) {
      const auto idx = model.link_index("l" + std::to_string(l));
      CHECK((poses[idx].matrix() - expected[l]).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("configuration size is checked") {
  const auto model = parse_urdf(planar_2r_urdf());
  CHECK(code_of([&] { forward_kinematics(model, Eigen::VectorXd::Zero(3)); }) == Errc::DofMismatch);
  CHECK(code_of([&] { geometric_jacobian(model, "nope", vec2(0, 0)); }) == Errc::UnknownLink);
}

TEST_CASE("geometric Jacobian matches central differences") {
  const auto model = parse_urdf(arm6_urdf());
  const auto tool = model.link_index("tool0");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto q = arm6_random(rng);
    const auto jac = geometric_jacobian(model, tool, forward_kinematics(model, q));
    CHECK((jac - oracle::fd_jacobian(model, tool, q)).cwiseAbs().maxCoeff() <= 1e-5);
  }
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const auto tree = random_tree(rng);
    const auto m = parse_urdf(tree.urdf());
    Eigen::VectorXd q(static_cast<Eigen::Index>(tree.dof()));
    for (auto& v : q) v = u(rng);
    const auto leaf = m.link_index("l" + std::to_string(tree.link_count - 1));
    const auto jac = geometric_jacobian(m, leaf, forward_kinematics(m, q));
    CHECK((jac - oracle::fd_jacobian(m, leaf, q)).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("IK recovers reachable targets from a nearby seed") {
  const auto model = parse_urdf(arm6_urdf());
  const auto tool = model.link_index("tool0");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  int converged = 0;
  for (int i = 0; i < 100; ++i) {
    const auto q_star = arm6_random(rng);
    const auto target = forward_kinematics(model, q_star)[tool];
    Eigen::VectorXd seed = q_star;
    for (auto& v : seed) v += jitter(rng);
    const auto res = inverse_kinematics(model, "tool0", target, seed);
    if (res.converged) {
      ++converged;
      CHECK(res.position_residual < 1e-4);
      CHECK(res.rotation_residual < 1e-3);
      const auto reached = forward_kinematics(model, res.q)[tool];
      CHECK((reached.translation - target.translation).norm() < 1e-4);
    }
  }
  CHECK(converged >= 95);
}

TEST_CASE("IK returns immediately when the seed already hits the target") {
  const auto model = parse_urdf(arm6_urdf());
  const auto q = arm6_home();
  const auto res = inverse_kinematics(model, "tool0", forward_kinematics(model, q)[model.link_index("tool0")], q);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.q == q);
}

TEST_CASE("IK on an unreachable target reports failure with its best iterate") {
  const auto model = parse_urdf(planar_2r_urdf());
  const auto target = RigidTransform::from_translation({5, 0, 0});
  IkParams params;
  params.max_iterations = 50;
  const auto res = inverse_kinematics(model, "tip", target, vec2(0.3, 0.3), params);
  CHECK_FALSE(res.converged);
  CHECK(res.position_residual >= 3.0 - 1e-9);
  CHECK(res.position_residual < 4.0);
  CHECK(res.q.allFinite());
}

TEST_CASE("velocity integration is forward Euler with clamping") {
  const auto model = parse_urdf(planar_2r_urdf());
  std::vector<JointConfiguration> v(10, vec2(1.0, -2.0));
  const auto out = integrate_velocities(model, vec2(0, 0), v, 0.1);
  REQUIRE(out.trace.size() == 10);
  CHECK((out.trace[4] - vec2(0.5, -1.0)).norm() < 1e-12);
  CHECK(out.clamps.empty());
  const auto fast = integrate_velocities(model, vec2(3.0, 0), {vec2(10, 0)}, 0.1);
  CHECK(fast.trace[0][0] == 3.14159);
  REQUIRE(fast.clamps.size() == 1);
  CHECK(fast.clamps[0].requested == Catch::Approx(4.0));
  CHECK(code_of([&] { integrate_velocities(model, vec2(0, 0), v, 0.0); }) == Errc::NonpositiveDt);
}

TEST_CASE("trajectory expansion covers all three action modes") {
  const auto model = parse_urdf(arm6_urdf());
  const auto tool = model.link_index("tool0");

  JointSpaceActions js;
  for (int t = 0; t < 5; ++t) js.configurations.push_back(arm6_home() * (1.0 + 0.01 * t));
  js.configurations[2][2] = 9.0;  // beyond the elbow limit
  const auto a = expand_trajectory(model, js);
  CHECK(a.poses.frame_count() == 5);
  CHECK(a.joints[2][2] == 3.14159);
  REQUIRE(a.clamps.size() == 1);
  CHECK(a.clamps[0].frame == 2);

  EndEffectorActions ee;
  ee.ee_link = "tool0";
  for (const auto& q : js.configurations) ee.targets.push_back(forward_kinematics(model, q)[tool]);
  ee.targets[2] = forward_kinematics(model, arm6_home())[tool];
  ee.gripper = {0, 1, 1, 0, 0};
  const auto b = expand_trajectory(model, ee, {}, arm6_home());
  REQUIRE(b.ik.size() == 5);
  for (const auto& r : b.ik) CHECK(r.converged);
  CHECK(b.gripper == ee.gripper);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK((b.poses.frames[t][tool].translation - ee.targets[t].translation).norm() < 1e-4);
  }

  JointVelocityActions jv{std::vector<JointConfiguration>(3, Eigen::VectorXd::Constant(6, 0.1)), 0.5, arm6_home()};
  const auto c = expand_trajectory(model, jv);
  CHECK((c.joints.back() - (arm6_home().array() + 0.15).matrix()).norm() < 1e-12);

  CHECK(code_of([&] { expand_trajectory(model, JointSpaceActions{}); }) == Errc::EmptySequence);
  CHECK(code_of([&] { expand_trajectory(model, JointSpaceActions{{Eigen::VectorXd::Zero(5)}}); }) ==
        Errc::DofMismatch);
}

TEST_CASE("base calibration left-multiplies every pose") {
  const auto model = parse_urdf(arm6_urdf());
  LinkPoseSequence seq;
  seq.frames.push_back(forward_kinematics(model, arm6_home()));
  const auto g = RigidTransform::from_xyz_rpy({0.1, -0.2, 0.3}, {0.2, 0.1, -0.4});
  const auto out = apply_base_calibration(g, seq);
  for (std::size_t l = 0; l < seq.link_count(); ++l) {
    CHECK((out.frames[0][l].matrix() - g.matrix() * seq.frames[0][l].matrix()).cwiseAbs().maxCoeff() < 1e-14);
  }
}
