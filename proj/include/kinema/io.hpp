#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinema/camera.hpp"
#include "kinema/error.hpp"
#include "kinema/image.hpp"
#include "kinema/kinematics.hpp"

namespace kinema {

using json = nlohmann::json;

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::IoFailure, path.string() + ": " + e.what());
  }
}

inline void save_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << value.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Rigid transforms, cameras, actions, link poses

inline json to_json(const RigidTransform& t) {
  const auto& q = t.rotation;
  return {{"translation", {t.translation.x(), t.translation.y(), t.translation.z()}},
          {"quaternion", {q.w(), q.x(), q.y(), q.z()}}};
}

inline RigidTransform transform_from_json(const json& j) {
  try {
    const auto t = j.at("translation").get<std::array<double, 3>>();
    const auto q = j.at("quaternion").get<std::array<double, 4>>();
    Eigen::Quaterniond rotation(q[0], q[1], q[2], q[3]);
    if (std::abs(rotation.norm() - 1.0) > 1e-6) throw Error(Errc::InvalidArgument, "quaternion is not unit length");
    rotation.normalize();
    return {rotation, Eigen::Vector3d(t[0], t[1], t[2])};
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad transform: ") + e.what());
  }
}

inline json to_json(const CameraModel& c) {
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
          {"width", c.width}, {"height", c.height}, {"extrinsics", to_json(c.extrinsics)}};
}

inline CameraModel camera_from_json(const json& j) {
  CameraModel c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.extrinsics = j.contains("extrinsics") ? transform_from_json(j.at("extrinsics")) : RigidTransform::identity();
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidCamera, std::string("bad camera file: ") + e.what());
  }
  c.check();
  return c;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Action files: {"mode": "joint" | "ee" | "joint_velocity", "frames": [...]}.
/// ee frames are {"translation": [x,y,z], "quaternion": [w,x,y,z], "gripper"?}.
inline ActionSequence actions_from_json(const json& j) {
  try {
    const auto mode = j.at("mode").get<std::string>();
    const auto& frames = j.at("frames");
    if (mode == "joint") {
      JointSpaceActions a;
      for (const auto& f : frames) a.configurations.push_back(vector_from_json(f));
      return a;
    }
    if (mode == "ee") {
      EndEffectorActions a;
      a.ee_link = j.at("ee_link").get<std::string>();
      a.gripper_joints = j.value("gripper_joints", std::vector<std::string>{});
      for (const auto& f : frames) {
        a.targets.push_back(transform_from_json(f));
        if (f.contains("gripper")) a.gripper.push_back(f.at("gripper").get<double>());
      }
      if (!a.gripper.empty() && a.gripper.size() != a.targets.size()) {
        throw Error(Errc::InvalidArgument, "gripper value missing on some frames");
      }
      return a;
    }
    if (mode == "joint_velocity") {
      JointVelocityActions a;
      a.dt = j.at("dt").get<double>();
      a.initial = vector_from_json(j.at("initial"));
      for (const auto& f : frames) a.velocities.push_back(vector_from_json(f));
      return a;
    }
    throw Error(Errc::InvalidArgument, "unknown action mode '" + mode + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad action file: ") + e.what());
  }
}

inline json to_json(const ActionSequence& actions) {
  json out;
  std::visit(
      [&out](const auto& a) {
        using A = std::decay_t<decltype(a)>;
        json frames = json::array();
        if constexpr (std::is_same_v<A, EndEffectorActions>) {
          out["mode"] = "ee";
          out["ee_link"] = a.ee_link;
          if (!a.gripper_joints.empty()) out["gripper_joints"] = a.gripper_joints;
          for (std::size_t t = 0; t < a.targets.size(); ++t) {
            json f = to_json(a.targets[t]);
            if (!a.gripper.empty()) f["gripper"] = a.gripper[t];
            frames.push_back(std::move(f));
          }
        } else if constexpr (std::is_same_v<A, JointSpaceActions>) {
          out["mode"] = "joint";
          for (const auto& q : a.configurations) frames.push_back(vector_to_json(q));
        } else {
          out["mode"] = "joint_velocity";
          out["dt"] = a.dt;
          out["initial"] = vector_to_json(a.initial);
          for (const auto& v : a.velocities) frames.push_back(vector_to_json(v));
        }
        out["frames"] = std::move(frames);
      },
      actions);
  return out;
}

/// Joint trace in the action-file schema (mode "joint").
inline json joint_trace_to_json(const RobotModel& model, const std::vector<JointConfiguration>& trace) {
  json out = to_json(ActionSequence{JointSpaceActions{trace}});
  out["joint_names"] = model.actuated_order();
  return out;
}

inline json to_json(const RobotModel& model, const LinkPoseSequence& poses) {
  json links = json::array();
  for (const auto& l : model.links()) links.push_back(l.name);
  json frames = json::array();
  for (const auto& frame : poses.frames) {
    json f = json::array();
    for (const auto& p : frame) f.push_back(to_json(p));
    frames.push_back(std::move(f));
  }
  return {{"links", links}, {"frames", frames}};
}

/// Reads a link-pose file and reorders it to the model's link order.
inline LinkPoseSequence link_poses_from_json(const RobotModel& model, const json& j) {
  try {
    const auto names = j.at("links").get<std::vector<std::string>>();
    std::vector<std::size_t> slot;
    for (const auto& n : names) slot.push_back(require_link(model, n));
    LinkPoseSequence out;
    for (const auto& f : j.at("frames")) {
      if (f.size() != names.size()) throw Error(Errc::MissingLinkPose, "frame has wrong number of link poses");
      LinkPoses poses(model.links().size());
      std::vector<bool> seen(model.links().size(), false);
      for (std::size_t k = 0; k < names.size(); ++k) {
        poses[slot[k]] = transform_from_json(f[k]);
        seen[slot[k]] = true;
      }
      for (std::size_t l = 0; l < seen.size(); ++l) {
        if (!seen[l]) throw Error(Errc::MissingLinkPose, "no pose for link '" + model.links()[l].name + "'");
      }
      out.frames.push_back(std::move(poses));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad link pose file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Tensor files
//
// Layout (all little-endian):
//   char[4]  magic "KTNS"
//   u32      version (1)
//   u32      T, H, W, C
//   u32      flags (bit 0: validity bitmask follows the data)
//   f32      T*H*W*C values, THWC order
//   u8       ceil(T*H*W / 8) bitmask bytes, LSB first, when flagged

struct TensorHeader {
  std::uint32_t frames = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  bool has_validity = false;
};

struct Tensor {
  TensorHeader header;
  std::vector<float> values;
  std::vector<std::uint8_t> validity;  // one byte per pixel (unpacked)
};

namespace detail {

inline constexpr char kTensorMagic[4] = {'K', 'T', 'N', 'S'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T> && (sizeof(T) == 4));
  std::uint32_t bits = 0;
  std::memcpy(&bits, &value, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), 4);
}

template <typename T>
T read_le(std::istream& in) {
  std::uint32_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace detail

inline void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto& h = tensor.header;
  const std::size_t pixels = std::size_t{h.frames} * h.height * h.width;
  if (tensor.values.size() != pixels * h.channels) throw Error(Errc::ShapeMismatch, "tensor data size mismatch");
  if (h.has_validity && tensor.validity.size() != pixels) throw Error(Errc::ShapeMismatch, "validity size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(detail::kTensorMagic, 4);
  detail::write_le<std::uint32_t>(out, 1);
  for (auto d : {h.frames, h.height, h.width, h.channels}) detail::write_le<std::uint32_t>(out, d);
  detail::write_le<std::uint32_t>(out, h.has_validity ? 1u : 0u);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.values.data()),
              static_cast<std::streamsize>(tensor.values.size() * sizeof(float)));
  } else {
    for (float v : tensor.values) detail::write_le<float>(out, v);
  }
  if (h.has_validity) {
    std::vector<std::uint8_t> bits((pixels + 7) / 8, 0);
    for (std::size_t i = 0; i < pixels; ++i) {
      if (tensor.validity[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kTensorMagic, 4) != 0) {
    throw Error(Errc::UnsupportedFormat, path.string() + " is not a tensor file");
  }
  const auto version = detail::read_le<std::uint32_t>(in);
  if (!in) throw Error(Errc::IoFailure, "truncated tensor header in " + path.string());
  if (version != 1) throw Error(Errc::UnsupportedFormat, "unknown tensor version " + std::to_string(version));
  Tensor t;
  t.header.frames = detail::read_le<std::uint32_t>(in);
  t.header.height = detail::read_le<std::uint32_t>(in);
  t.header.width = detail::read_le<std::uint32_t>(in);
  t.header.channels = detail::read_le<std::uint32_t>(in);
  t.header.has_validity = (detail::read_le<std::uint32_t>(in) & 1u) != 0;
  if (!in) throw Error(Errc::IoFailure, "truncated tensor header in " + path.string());
  const std::size_t pixels = std::size_t{t.header.frames} * t.header.height * t.header.width;
  // check the declared shape against the file before allocating for it
  const std::uintmax_t expected = 28 + std::uintmax_t{pixels} * t.header.channels * 4 +
                                  (t.header.has_validity ? (pixels + 7) / 8 : 0);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec || actual != expected) {
    throw Error(Errc::IoFailure, path.string() + " holds " + std::to_string(actual) + " bytes, header implies " +
                                     std::to_string(expected));
  }
  t.values.resize(pixels * t.header.channels);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  } else {
    for (auto& v : t.values) v = detail::read_le<float>(in);
  }
  if (t.header.has_validity) {
    std::vector<std::uint8_t> bits((pixels + 7) / 8);
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    t.validity.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) t.validity[i] = (bits[i / 8] >> (i % 8)) & 1u;
  }
  if (!in) throw Error(Errc::IoFailure, "truncated tensor data in " + path.string());
  return t;
}

template <typename Scalar>
void write_pointmap_tensor(const std::filesystem::path& path, const BasicPointMapSequence<Scalar>& seq) {
  if (seq.empty()) throw Error(Errc::EmptySequence, "no frames to write");
  check_uniform_shape(seq);
  Tensor t;
  t.header = {static_cast<std::uint32_t>(seq.size()), static_cast<std::uint32_t>(seq.front().height()),
              static_cast<std::uint32_t>(seq.front().width()), 3, true};
  for (const auto& f : seq) {
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
      for (int c = 0; c < 3; ++c) t.values.push_back(static_cast<float>(f.coords[i][c]));
      t.validity.push_back(f.valid[i]);
    }
  }
  write_tensor(path, t);
}

inline PointMapSequence read_pointmap_tensor(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.header.channels != 3 || !t.header.has_validity) {
    throw Error(Errc::UnsupportedFormat, path.string() + " is not a pointmap tensor");
  }
  PointMapSequence seq;
  std::size_t k = 0;
  for (std::uint32_t f = 0; f < t.header.frames; ++f) {
    PointMapFrame frame(static_cast<int>(t.header.height), static_cast<int>(t.header.width));
    for (std::size_t i = 0; i < frame.coords.size(); ++i, ++k) {
      frame.coords[i] = Eigen::Vector3f(t.values[3 * k], t.values[3 * k + 1], t.values[3 * k + 2]);
      frame.valid[i] = t.validity[k];
    }
    seq.push_back(std::move(frame));
  }
  return seq;
}

inline void write_mask_tensor(const std::filesystem::path& path, const std::vector<MaskFrame>& masks) {
  if (masks.empty()) throw Error(Errc::EmptySequence, "no frames to write");
  Tensor t;
  t.header = {static_cast<std::uint32_t>(masks.size()), static_cast<std::uint32_t>(masks.front().rows()),
              static_cast<std::uint32_t>(masks.front().cols()), 1, false};
  for (const auto& m : masks) {
    if (!m.same_shape(masks.front().rows(), masks.front().cols())) throw Error(Errc::ShapeMismatch, "mask sizes differ");
    t.values.insert(t.values.end(), m.values().begin(), m.values().end());
  }
  write_tensor(path, t);
}

inline std::vector<MaskFrame> read_mask_tensor(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.header.channels != 1) throw Error(Errc::UnsupportedFormat, path.string() + " is not a mask tensor");
  std::vector<MaskFrame> out;
  const std::size_t n = std::size_t{t.header.height} * t.header.width;
  for (std::uint32_t f = 0; f < t.header.frames; ++f) {
    MaskFrame m(static_cast<int>(t.header.height), static_cast<int>(t.header.width));
    std::copy_n(t.values.begin() + static_cast<std::ptrdiff_t>(f * n), n, m.values().begin());
    out.push_back(std::move(m));
  }
  return out;
}

inline void write_rgb_tensor(const std::filesystem::path& path, const RgbSequence& frames) {
  if (frames.empty()) throw Error(Errc::EmptySequence, "no frames to write");
  Tensor t;
  t.header = {static_cast<std::uint32_t>(frames.size()), static_cast<std::uint32_t>(frames.front().rows()),
              static_cast<std::uint32_t>(frames.front().cols()), 3, false};
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front().rows(), frames.front().cols())) throw Error(Errc::ShapeMismatch, "RGB sizes differ");
    for (const auto& px : f.values()) t.values.insert(t.values.end(), {px.x(), px.y(), px.z()});
  }
  write_tensor(path, t);
}

inline RgbSequence read_rgb_tensor(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.header.channels != 3 || t.header.has_validity) {
    throw Error(Errc::UnsupportedFormat, path.string() + " is not an RGB tensor");
  }
  RgbSequence out;
  std::size_t k = 0;
  for (std::uint32_t f = 0; f < t.header.frames; ++f) {
    RgbFrame frame(static_cast<int>(t.header.height), static_cast<int>(t.header.width), Rgb::Zero());
    for (auto& px : frame.values()) {
      px = Rgb(t.values[k], t.values[k + 1], t.values[k + 2]);
      k += 3;
    }
    out.push_back(std::move(frame));
  }
  return out;
}

/// JSON sidecar describing a pointmap tensor written next to it.
inline json pointmap_sidecar(const std::string& tensor_file, const CameraModel& camera, std::size_t frames) {
  return {{"tensor", tensor_file},
          {"camera", to_json(camera)},
          {"frame_count", frames},
          {"height", camera.height},
          {"width", camera.width},
          {"channels", 3},
          {"layout", "THWC"},
          {"dtype", "float32le"},
          {"validity", "bitmask"},
          {"units", "meters"},
          {"frame", "camera"}};
}

}  // namespace kinema
