#pragma once

#include <string>

#include <Eigen/Core>

#include "kinema/error.hpp"
#include "kinema/se3.hpp"

namespace kinema {

/// Pinhole camera. `extrinsics` maps reconstruction/world coordinates into the
/// camera frame (x right, y down, z forward).
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  RigidTransform extrinsics;
  int width = 1;
  int height = 1;

  void check() const {
    if (!(fx > 0.0 && fy > 0.0)) throw Error(Errc::InvalidCamera, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(Errc::InvalidCamera, "image size must be positive");
    if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height)) {
      throw Error(Errc::InvalidCamera, "principal point outside the image");
    }
    if (!extrinsics.is_valid()) throw Error(Errc::InvalidCamera, "extrinsics is not a rigid transform");
  }

  Eigen::Matrix3d intrinsic_matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Sub-pixel projection of a camera-frame point.
inline PixelProjection project_camera_point(const CameraModel& camera, const Eigen::Vector3d& p) {
  if (!(p.z() > 0.0)) throw Error(Errc::BehindCamera, "point has camera depth " + std::to_string(p.z()));
  return {camera.cx + camera.fx * p.x() / p.z(), camera.cy + camera.fy * p.y() / p.z(), p.z()};
}

inline PixelProjection project_point(const CameraModel& camera, const Eigen::Vector3d& world) {
  return project_camera_point(camera, camera.extrinsics * world);
}

inline Eigen::Vector3d unproject_to_camera(const CameraModel& camera, double u, double v, double z) {
  if (!(z > 0.0)) throw Error(Errc::NonpositiveDepth, "depth must be positive, got " + std::to_string(z));
  return {(u - camera.cx) * z / camera.fx, (v - camera.cy) * z / camera.fy, z};
}

/// Inverse of project_point: world-frame point seen at (u, v) with depth z.
inline Eigen::Vector3d unproject(const CameraModel& camera, double u, double v, double z) {
  return camera.extrinsics.inverse() * unproject_to_camera(camera, u, v, z);
}

}  // namespace kinema
