#pragma once

// Independent reference computations. Nothing here calls into the code paths
// it is used to check.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "fixtures.hpp"

namespace kinema::testing::oracle {

inline Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
inline Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

/// Rodrigues' formula.
inline Eigen::Matrix3d rot_axis(const Eigen::Vector3d& k, double a) {
  Eigen::Matrix3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(a) * K + (1 - std::cos(a)) * K * K;
}

inline Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Naive 4x4 composition over a random tree; q indexes non-fixed joints in order.
inline std::vector<Eigen::Matrix4d> tree_fk(const RandomTree& tree, const Eigen::VectorXd& q) {
  std::vector<Eigen::Matrix4d> poses(tree.link_count, Eigen::Matrix4d::Identity());
  int slot = 0;
  for (std::size_t j = 0; j < tree.joints.size(); ++j) {
    const auto& J = tree.joints[j];
    const Eigen::Matrix4d origin = homogeneous(rot_z(J.rpy.z()) * rot_y(J.rpy.y()) * rot_x(J.rpy.x()), J.xyz);
    Eigen::Matrix4d motion = Eigen::Matrix4d::Identity();
    if (J.type == "revolute" || J.type == "continuous") {
      motion = homogeneous(rot_axis(J.axis, q[slot++]), Eigen::Vector3d::Zero());
    } else if (J.type == "prismatic") {
      motion = homogeneous(Eigen::Matrix3d::Identity(), J.axis * q[slot++]);
    }
    poses[j + 1] = poses[J.parent] * origin * motion;
  }
  return poses;
}

/// Central finite differences of FK for the link origin: position columns and
/// rotation columns via the log map of R(q+h) R(q-h)^T.
inline Eigen::Matrix<double, 6, Eigen::Dynamic> fd_jacobian(const RobotModel& model, std::size_t link,
                                                            const Eigen::VectorXd& q, double h = 1e-6) {
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Eigen::VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const auto tp = forward_kinematics(model, qp)[link];
    const auto tm = forward_kinematics(model, qm)[link];
    jac.block<3, 1>(0, i) = (tp.translation - tm.translation) / (2 * h);
    const Eigen::AngleAxisd aa(tp.rotation_matrix() * tm.rotation_matrix().transpose());
    jac.block<3, 1>(3, i) = aa.axis() * aa.angle() / (2 * h);
  }
  return jac;
}

inline double brute_nearest_sq(const Eigen::Vector3d& p, const PointCloud& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : cloud) best = std::min(best, (p - q).squaredNorm());
  return best;
}

inline double brute_chamfer(const PointCloud& a, const PointCloud& b, bool squared) {
  auto directed = [squared](const PointCloud& from, const PointCloud& to) {
    double s = 0.0;
    for (const auto& p : from) {
      const double d2 = brute_nearest_sq(p, to);
      s += squared ? d2 : std::sqrt(d2);
    }
    return s / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

inline double brute_fscore(const PointCloud& a, const PointCloud& b, double tau) {
  auto share = [tau](const PointCloud& from, const PointCloud& to) {
    std::size_t hits = 0;
    for (const auto& p : from) {
      for (const auto& q : to) {
        if ((p - q).norm() < tau) {
          ++hits;
          break;
        }
      }
    }
    return static_cast<double>(hits) / static_cast<double>(from.size());
  };
  const double p = share(a, b), r = share(b, a);
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

/// Intersection of the ray through pixel center (col+0.5, row+0.5) with the
/// plane z = depth, identity extrinsics.
inline Eigen::Vector3d pixel_ray_plane(const CameraModel& cam, int row, int col, double depth) {
  const double x = (col + 0.5 - cam.cx) / cam.fx;
  const double y = (row + 0.5 - cam.cy) / cam.fy;
  return {x * depth, y * depth, depth};
}

}  // namespace kinema::testing::oracle
