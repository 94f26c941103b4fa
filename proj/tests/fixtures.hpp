#pragma once

// Robot descriptions and scenes shared by the unit and acceptance suites.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinema.hpp"

namespace kinema::testing {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string vec(const Eigen::Vector3d& v) { return num(v.x()) + " " + num(v.y()) + " " + num(v.z()); }

/// Planar arm in the xy-plane, two unit links along local x and a fixed tip.
inline std::string planar_2r_urdf() {
  return R"(<?xml version="1.0"?>
<robot name="planar2r">
  <link name="base"/>
  <link name="link1"/>
  <link name="link2"/>
  <link name="tip"/>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="link1"/>
    <origin xyz="0 0 0" rpy="0 0 0"/><axis xyz="0 0 1"/>
    <limit lower="-3.14159" upper="3.14159" effort="1" velocity="1"/>
  </joint>
  <joint name="j2" type="revolute">
    <parent link="link1"/><child link="link2"/>
    <origin xyz="1 0 0" rpy="0 0 0"/><axis xyz="0 0 1"/>
    <limit lower="-3.14159" upper="3.14159" effort="1" velocity="1"/>
  </joint>
  <joint name="tip_joint" type="fixed">
    <parent link="link2"/><child link="tip"/>
    <origin xyz="1 0 0" rpy="0 0 0"/>
  </joint>
</robot>
)";
}

/// Six revolute joints with UR-style offsets; non-singular away from q = 0.
/// Every link carries a primitive so the arm also renders.
inline std::string arm6_urdf() {
  return R"(<?xml version="1.0"?>
<robot name="arm6">
  <link name="base_link">
    <visual><origin xyz="0 0 0.04"/><geometry><cylinder radius="0.08" length="0.08"/></geometry></visual>
  </link>
  <link name="shoulder">
    <visual><geometry><cylinder radius="0.06" length="0.12"/></geometry></visual>
  </link>
  <link name="upper_arm">
    <visual><origin xyz="0 0 0.2125"/><geometry><box size="0.08 0.08 0.425"/></geometry></visual>
  </link>
  <link name="forearm">
    <visual><origin xyz="0 0 0.196"/><geometry><box size="0.06 0.06 0.392"/></geometry></visual>
  </link>
  <link name="wrist1">
    <visual><geometry><sphere radius="0.045"/></geometry></visual>
  </link>
  <link name="wrist2">
    <visual><geometry><sphere radius="0.045"/></geometry></visual>
  </link>
  <link name="wrist3">
    <visual><geometry><cylinder radius="0.04" length="0.03"/></geometry></visual>
  </link>
  <link name="tool0">
    <visual><geometry><box size="0.03 0.03 0.03"/></geometry></visual>
  </link>
  <joint name="shoulder_pan" type="revolute">
    <parent link="base_link"/><child link="shoulder"/>
    <origin xyz="0 0 0.089"/><axis xyz="0 0 1"/>
    <limit lower="-6.2831853" upper="6.2831853" effort="1" velocity="1"/>
  </joint>
  <joint name="shoulder_lift" type="revolute">
    <parent link="shoulder"/><child link="upper_arm"/>
    <origin xyz="0 0.136 0"/><axis xyz="0 1 0"/>
    <limit lower="-6.2831853" upper="6.2831853" effort="1" velocity="1"/>
  </joint>
  <joint name="elbow" type="revolute">
    <parent link="upper_arm"/><child link="forearm"/>
    <origin xyz="0 -0.12 0.425"/><axis xyz="0 1 0"/>
    <limit lower="-3.14159" upper="3.14159" effort="1" velocity="1"/>
  </joint>
  <joint name="wrist_1" type="revolute">
    <parent link="forearm"/><child link="wrist1"/>
    <origin xyz="0 0 0.392"/><axis xyz="0 1 0"/>
    <limit lower="-6.2831853" upper="6.2831853" effort="1" velocity="1"/>
  </joint>
  <joint name="wrist_2" type="revolute">
    <parent link="wrist1"/><child link="wrist2"/>
    <origin xyz="0 0.093 0"/><axis xyz="0 0 1"/>
    <limit lower="-6.2831853" upper="6.2831853" effort="1" velocity="1"/>
  </joint>
  <joint name="wrist_3" type="revolute">
    <parent link="wrist2"/><child link="wrist3"/>
    <origin xyz="0 0 0.095"/><axis xyz="0 1 0"/>
    <limit lower="-6.2831853" upper="6.2831853" effort="1" velocity="1"/>
  </joint>
  <joint name="tool" type="fixed">
    <parent link="wrist3"/><child link="tool0"/>
    <origin xyz="0 0.082 0"/>
  </joint>
</robot>
)";
}

/// A configuration of arm6 away from the straight-up singularity.
inline Eigen::VectorXd arm6_home() {
  Eigen::VectorXd q(6);
  q << 0.3, -1.2, 1.5, -0.9, 1.1, 0.4;
  return q;
}

/// Random draw for arm6 that stays clear of the elbow and wrist singularities.
inline Eigen::VectorXd arm6_random(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd q = arm6_home();
  for (int i = 0; i < 6; ++i) q[i] += 0.8 * u(rng);
  if (std::abs(q[2]) < 0.4) q[2] = std::copysign(0.4, q[2] == 0.0 ? 1.0 : q[2]);
  if (std::abs(std::sin(q[4])) < 0.35) q[4] = 1.1;
  return q;
}

/// Parameters of a randomly generated tree, kept so an independent oracle can
/// recompute link poses without going through the parser.
struct RandomJoint {
  std::string type;
  int parent = 0;  // link index
  Eigen::Vector3d xyz;
  Eigen::Vector3d rpy;
  Eigen::Vector3d axis;
};

struct RandomTree {
  int link_count = 1;
  std::vector<RandomJoint> joints;  // joint i creates link i+1

  std::string urdf() const {
    std::ostringstream out;
    out << "<robot name=\"random\">\n";
    for (int l = 0; l < link_count; ++l) out << "  <link name=\"l" << l << "\"/>\n";
    for (std::size_t j = 0; j < joints.size(); ++j) {
      const auto& J = joints[j];
      out << "  <joint name=\"j" << j << "\" type=\"" << J.type << "\">\n"
          << "    <parent link=\"l" << J.parent << "\"/><child link=\"l" << j + 1 << "\"/>\n"
          << "    <origin xyz=\"" << vec(J.xyz) << "\" rpy=\"" << vec(J.rpy) << "\"/>\n"
          << "    <axis xyz=\"" << vec(J.axis) << "\"/>\n";
      if (J.type == "revolute") out << "    <limit lower=\"-10\" upper=\"10\"/>\n";
      if (J.type == "prismatic") out << "    <limit lower=\"-10\" upper=\"10\"/>\n";
      out << "  </joint>\n";
    }
    out << "</robot>\n";
    return out.str();
  }

  std::size_t dof() const {
    std::size_t n = 0;
    for (const auto& j : joints) n += j.type != "fixed";
    return n;
  }
};

inline RandomTree random_tree(std::mt19937_64& rng, int max_joints = 8) {
  std::uniform_int_distribution<int> count(1, max_joints);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  static const char* kinds[] = {"revolute", "continuous", "prismatic", "fixed"};
  std::uniform_int_distribution<int> kind(0, 3);
  RandomTree tree;
  const int n = count(rng);
  for (int j = 0; j < n; ++j) {
    RandomJoint J;
    J.type = kinds[kind(rng)];
    J.parent = std::uniform_int_distribution<int>(0, j)(rng);
    J.xyz = {u(rng), u(rng), u(rng)};
    J.rpy = {angle(rng), 0.5 * angle(rng), angle(rng)};
    Eigen::Vector3d a(u(rng), u(rng), u(rng));
    J.axis = a.normalized();
    tree.joints.push_back(J);
  }
  tree.link_count = n + 1;
  return tree;
}

/// Fronto-parallel square at depth z spanning pixels [c0, c1) x [r0, r1) exactly
/// under an identity-extrinsics camera. Single link, two triangles.
inline RobotModel square_model(const CameraModel& cam, double z, int c0, int c1, int r0, int r1,
                               const std::string& link = "square") {
  auto mesh = std::make_shared<TriangleMesh>();
  auto corner = [&](int c, int r) { return unproject_to_camera(cam, c, r, z); };
  mesh->vertices = {corner(c0, r0), corner(c1, r0), corner(c1, r1), corner(c0, r1)};
  mesh->triangles = {{0, 1, 2}, {0, 2, 3}};
  Link l{link, {Visual{RigidTransform::identity(), MeshGeometry{"square", Eigen::Vector3d::Ones()}, mesh}}};
  return RobotModel::build("square", {l}, {});
}

inline CameraModel toy_camera(int width = 64, int height = 48) {
  CameraModel cam;
  cam.fx = cam.fy = 0.9 * width;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  return cam;
}

/// Camera looking at the arm6 workspace from the front (+x), slightly above.
inline CameraModel arm6_camera(int width, int height) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 0.8 * width;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  // camera at (2.2, 0, 0.6) looking toward -x; camera z = -world x, x = -world y, y = -world z
  Eigen::Matrix3d r;
  r << 0, -1, 0, 0, 0, -1, -1, 0, 0;
  const Eigen::Vector3d eye(2.2, 0.0, 0.6);
  cam.extrinsics = RigidTransform(Eigen::Quaterniond(r), -(r * eye));
  return cam;
}

}  // namespace kinema::testing
