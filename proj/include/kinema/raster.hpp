#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "kinema/camera.hpp"
#include "kinema/error.hpp"
#include "kinema/image.hpp"
#include "kinema/kinematics.hpp"
#include "kinema/parallel.hpp"
#include "kinema/robot_model.hpp"

namespace kinema {

template <typename Scalar = float>
struct RasterFrame {
  PointMap<Scalar> pointmap;
  OccupancyGrid occupancy;
  std::optional<RgbFrame> rgb;
};

template <typename Scalar = float>
struct RenderedSequence {
  BasicPointMapSequence<Scalar> pointmaps;
  std::vector<OccupancyGrid> occupancy;
  RgbSequence rgb;  // empty unless requested
};

inline constexpr float kUntexturedGrey = 0.7f;

namespace detail {

inline constexpr double kNearPlane = 1e-6;  // m; geometry closer than this is clipped

struct ClipVertex {
  Eigen::Vector3d cam;
  Eigen::Vector3d color;
};

struct ScreenVertex {
  double u = 0.0;
  double v = 0.0;
  double inv_z = 0.0;
  Eigen::Vector3d cam;
  Eigen::Vector3d color;
};

inline double edge_raw(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Evaluated from a canonical vertex order so that two triangles sharing an edge
// see exactly negated values; shared-edge pixels then have exactly one owner.
inline double edge_fn(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  if (a.u < b.u || (a.u == b.u && a.v < b.v)) return edge_raw(a.u, a.v, b.u, b.v, px, py);
  return -edge_raw(b.u, b.v, a.u, a.v, px, py);
}

// Top-left style tie breaking on the positively oriented edge a -> b.
inline bool owns_edge(const ScreenVertex& a, const ScreenVertex& b, double orientation) {
  const double dx = orientation * (b.u - a.u);
  const double dy = orientation * (b.v - a.v);
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

inline int first_center_at_or_after(double x, int limit) {
  const double c = std::ceil(x - 0.5);
  return static_cast<int>(std::clamp(c, 0.0, static_cast<double>(limit)));
}

inline int last_center_at_or_before(double x, int limit) {
  const double c = std::floor(x - 0.5);
  return static_cast<int>(std::clamp(c, -1.0, static_cast<double>(limit - 1)));
}

template <typename Scalar>
class TriangleRasterizer {
 public:
  TriangleRasterizer(const CameraModel& camera, bool want_rgb)
      : camera_(camera),
        zbuffer_(camera.height, camera.width, std::numeric_limits<double>::infinity()),
        frame_{PointMap<Scalar>(camera.height, camera.width), OccupancyGrid(), std::nullopt} {
    if (want_rgb) frame_.rgb = RgbFrame(camera.height, camera.width, Rgb::Zero());
  }

  void draw(const std::array<ClipVertex, 3>& tri) {
    const bool all_in_front = std::all_of(tri.begin(), tri.end(), [](const auto& v) { return v.cam.z() >= kNearPlane; });
    if (all_in_front) {
      fill(tri[0], tri[1], tri[2]);
      return;
    }
    // Sutherland-Hodgman against the near plane
    std::vector<ClipVertex> poly;
    for (int k = 0; k < 3; ++k) {
      const auto& a = tri[k];
      const auto& b = tri[(k + 1) % 3];
      const bool a_in = a.cam.z() >= kNearPlane;
      const bool b_in = b.cam.z() >= kNearPlane;
      if (a_in) poly.push_back(a);
      if (a_in != b_in) {
        const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
        ClipVertex c{a.cam + t * (b.cam - a.cam), a.color + t * (b.color - a.color)};
        c.cam.z() = kNearPlane;
        poly.push_back(c);
      }
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) fill(poly[0], poly[k], poly[k + 1]);
  }

  RasterFrame<Scalar> finish() && {
    frame_.occupancy = frame_.pointmap.valid;
    return std::move(frame_);
  }

 private:
  ScreenVertex to_screen(const ClipVertex& v) const {
    const double inv_z = 1.0 / v.cam.z();
    return {camera_.cx + camera_.fx * v.cam.x() * inv_z, camera_.cy + camera_.fy * v.cam.y() * inv_z, inv_z, v.cam,
            v.color};
  }

  void fill(const ClipVertex& c0, const ClipVertex& c1, const ClipVertex& c2) {
    const std::array<ScreenVertex, 3> s{to_screen(c0), to_screen(c1), to_screen(c2)};
    const double area = edge_raw(s[0].u, s[0].v, s[1].u, s[1].v, s[2].u, s[2].v);
    if (area == 0.0 || !std::isfinite(area)) return;
    const double orientation = area > 0.0 ? 1.0 : -1.0;
    const std::array<bool, 3> owns{owns_edge(s[1], s[2], orientation), owns_edge(s[2], s[0], orientation),
                                   owns_edge(s[0], s[1], orientation)};

    const auto [umin, umax] = std::minmax({s[0].u, s[1].u, s[2].u});
    const auto [vmin, vmax] = std::minmax({s[0].v, s[1].v, s[2].v});
    const int W = camera_.width;
    const int H = camera_.height;
    const int col0 = first_center_at_or_after(umin, W);
    const int col1 = last_center_at_or_before(umax, W);
    const int row0 = first_center_at_or_after(vmin, H);
    const int row1 = last_center_at_or_before(vmax, H);

    for (int row = row0; row <= row1; ++row) {
      const double py = row + 0.5;
      for (int col = col0; col <= col1; ++col) {
        const double px = col + 0.5;
        const std::array<double, 3> e{edge_fn(s[1], s[2], px, py), edge_fn(s[2], s[0], px, py),
                                      edge_fn(s[0], s[1], px, py)};
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
          const double oriented = orientation * e[k];
          inside = oriented > 0.0 || (oriented == 0.0 && owns[k]);
        }
        if (!inside) continue;
        // perspective-correct weights: screen barycentrics scaled by 1/z
        const double sum = e[0] + e[1] + e[2];
        std::array<double, 3> w{};
        double wsum = 0.0;
        for (int k = 0; k < 3; ++k) {
          w[k] = (e[k] / sum) * s[k].inv_z;
          wsum += w[k];
        }
        Eigen::Vector3d point = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) point += (w[k] / wsum) * s[k].cam;
        double& zbest = zbuffer_(row, col);
        if (!(point.z() < zbest)) continue;
        zbest = point.z();
        frame_.pointmap.coords(row, col) = point.template cast<Scalar>();
        frame_.pointmap.valid(row, col) = 1;
        if (frame_.rgb) {
          Eigen::Vector3d color = Eigen::Vector3d::Zero();
          for (int k = 0; k < 3; ++k) color += (w[k] / wsum) * s[k].color;
          (*frame_.rgb)(row, col) = color.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
        }
      }
    }
  }

  const CameraModel& camera_;
  Grid<double> zbuffer_;
  RasterFrame<Scalar> frame_;
};

}  // namespace detail

/// Z-buffered triangle rasterization of every visual in the model, posed by
/// `link_poses` (indexed like model.links()), through the pinhole camera.
/// Each covered pixel stores the camera-space point of the nearest surface
/// along the ray through its center.
template <typename Scalar = float>
RasterFrame<Scalar> rasterize_frame(const RobotModel& model, const LinkPoses& link_poses, const CameraModel& camera,
                                    bool want_rgb = false) {
  camera.check();
  if (link_poses.size() != model.links().size()) {
    throw Error(Errc::MissingLinkPose, "got " + std::to_string(link_poses.size()) + " link poses for " +
                                           std::to_string(model.links().size()) + " links");
  }
  detail::TriangleRasterizer<Scalar> raster(camera, want_rgb);
  const Eigen::Vector3d grey = Eigen::Vector3d::Constant(kUntexturedGrey);
  for (std::size_t l = 0; l < model.links().size(); ++l) {
    const Link& link = model.links()[l];
    for (const auto& visual : link.visuals) {
      if (!visual.mesh) throw Error(Errc::UnresolvedMesh, "link '" + link.name + "' has an unloaded mesh");
      const TriangleMesh& mesh = *visual.mesh;
      const RigidTransform to_camera = camera.extrinsics * (link_poses[l] * visual.origin);
      std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
      for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = to_camera * mesh.vertices[i];
      for (const auto& t : mesh.triangles) {
        std::array<detail::ClipVertex, 3> tri;
        for (int k = 0; k < 3; ++k) {
          tri[k] = {cam[t[k]], mesh.has_colors() ? mesh.colors[t[k]] : grey};
        }
        raster.draw(tri);
      }
    }
  }
  return std::move(raster).finish();
}

/// Renders every frame of a pose sequence; frame t depends only on poses t.
template <typename Scalar = float>
RenderedSequence<Scalar> render_sequence(const RobotModel& model, const LinkPoseSequence& poses,
                                         const CameraModel& camera, bool want_rgb = false, unsigned jobs = 1) {
  const std::size_t T = poses.frame_count();
  std::vector<RasterFrame<Scalar>> frames(T);
  parallel_for(T, jobs, [&](std::size_t t) { frames[t] = rasterize_frame<Scalar>(model, poses.frames[t], camera, want_rgb); });
  RenderedSequence<Scalar> out;
  out.pointmaps.reserve(T);
  out.occupancy.reserve(T);
  for (auto& f : frames) {
    out.pointmaps.push_back(std::move(f.pointmap));
    out.occupancy.push_back(std::move(f.occupancy));
    if (want_rgb) out.rgb.push_back(std::move(*f.rgb));
  }
  return out;
}

}  // namespace kinema
