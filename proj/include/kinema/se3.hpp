#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace kinema {

/// Element of SE(3): rotation as a unit quaternion followed by a translation.
/// Applying the transform to a point x gives R x + t.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {}

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    return {Eigen::Quaterniond::Identity(), t};
  }

  /// URDF convention: fixed-axis roll about x, then pitch about y, then yaw about z.
  static RigidTransform from_xyz_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
    Eigen::Quaterniond q = Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                           Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                           Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX());
    return {q, xyz};
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const { return rotation * point + translation; }

  RigidTransform inverse() const {
    const Eigen::Quaterniond inv = rotation.conjugate();
    return {inv, -(inv * translation)};
  }

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  bool is_valid(double tolerance = 1e-9) const {
    return std::abs(rotation.norm() - 1.0) <= tolerance && rotation.coeffs().allFinite() &&
           translation.allFinite();
  }

  /// Quaternion roll-pitch-yaw in the same fixed-axis convention as from_xyz_rpy.
  Eigen::Vector3d rpy() const {
    const Eigen::Matrix3d r = rotation_matrix();
    const double pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
    if (std::abs(std::cos(pitch)) < 1e-12) {
      // gimbal lock: fold yaw into roll
      return {std::atan2(-r(1, 2), r(1, 1)), pitch, 0.0};
    }
    return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
  }
};

/// Axis-angle vector of a unit quaternion (log map), angle in [0, pi].
inline Eigen::Vector3d log_rotation(const Eigen::Quaterniond& q_in) {
  Eigen::Quaterniond q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d v = q.vec();
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;  // first-order expansion near identity
  const double angle = 2.0 * std::atan2(s, q.w());
  return v * (angle / s);
}

inline Eigen::Quaterniond exp_rotation(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    return q.normalized();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
}

/// Rotation taking `from` into `to`, expressed in the world frame: log(to * from^-1).
inline Eigen::Vector3d rotation_error(const Eigen::Quaterniond& to, const Eigen::Quaterniond& from) {
  return log_rotation(to * from.conjugate());
}

}  // namespace kinema
