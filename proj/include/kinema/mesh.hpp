#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "kinema/error.hpp"

namespace kinema {

/// Indexed triangle soup in a link-local frame, meters.
struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Eigen::Vector3d> colors;  // empty, or one RGB in [0,1] per vertex

  bool has_colors() const { return !colors.empty(); }

  bool is_valid() const {
    if (!colors.empty() && colors.size() != vertices.size()) return false;
    const auto n = vertices.size();
    return std::all_of(triangles.begin(), triangles.end(), [n](const auto& t) {
      return t[0] < n && t[1] < n && t[2] < n;
    });
  }
};

enum class MeshFormat { Obj, StlBinary, StlAscii };

inline void scale_mesh(TriangleMesh& mesh, const Eigen::Vector3d& scale) {
  for (auto& v : mesh.vertices) v = v.cwiseProduct(scale);
}

namespace detail {

inline double parse_double(std::string_view token, std::string_view what) {
  // std::from_chars for double is available in libstdc++ 11
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(Errc::CorruptGeometry, "bad number '" + std::string(token) + "' in " + std::string(what));
  }
  return value;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline TriangleMesh load_obj(std::string_view text) {
  TriangleMesh mesh;
  std::vector<Eigen::Vector3d> colors;
  bool all_colored = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "v") {
      if (tokens.size() < 4) throw Error(Errc::CorruptGeometry, "OBJ vertex needs 3 coordinates");
      mesh.vertices.emplace_back(parse_double(tokens[1], "OBJ"), parse_double(tokens[2], "OBJ"),
                                 parse_double(tokens[3], "OBJ"));
      if (tokens.size() >= 7) {
        colors.emplace_back(parse_double(tokens[4], "OBJ"), parse_double(tokens[5], "OBJ"),
                            parse_double(tokens[6], "OBJ"));
      } else {
        all_colored = false;
      }
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) throw Error(Errc::CorruptGeometry, "OBJ face needs at least 3 vertices");
      std::vector<std::uint32_t> face;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const auto idx_text = tokens[k].substr(0, tokens[k].find('/'));
        long long idx = 0;
        auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
        if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx == 0) {
          throw Error(Errc::CorruptGeometry, "bad OBJ face index '" + std::string(tokens[k]) + "'");
        }
        const long long count = static_cast<long long>(mesh.vertices.size());
        const long long resolved = idx > 0 ? idx - 1 : count + idx;
        if (resolved < 0 || resolved >= count) {
          throw Error(Errc::CorruptGeometry, "OBJ face index out of range: " + std::to_string(idx));
        }
        face.push_back(static_cast<std::uint32_t>(resolved));
      }
      for (std::size_t k = 1; k + 1 < face.size(); ++k) mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
    // vt, vn, o, g, s, usemtl, mtllib: not needed for geometry
  }
  if (all_colored && !colors.empty()) mesh.colors = std::move(colors);
  return mesh;
}

class VertexWelder {
 public:
  explicit VertexWelder(TriangleMesh& mesh) : mesh_(mesh) {}

  std::uint32_t add(const std::array<float, 3>& p) {
    auto [it, inserted] = index_.try_emplace(p, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.emplace_back(p[0], p[1], p[2]);
    return it->second;
  }

 private:
  TriangleMesh& mesh_;
  std::map<std::array<float, 3>, std::uint32_t> index_;
};

inline TriangleMesh load_stl_binary(std::string_view bytes) {
  constexpr std::size_t kHeader = 84;
  constexpr std::size_t kFacet = 50;
  if (bytes.size() < kHeader) throw Error(Errc::CorruptGeometry, "binary STL shorter than its header");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, sizeof(count));
  if (bytes.size() != kHeader + kFacet * static_cast<std::size_t>(count)) {
    throw Error(Errc::CorruptGeometry, "binary STL declares " + std::to_string(count) + " facets but holds " +
                                           std::to_string((bytes.size() - kHeader) / kFacet));
  }
  TriangleMesh mesh;
  VertexWelder welder(mesh);
  mesh.triangles.reserve(count);
  for (std::uint32_t f = 0; f < count; ++f) {
    const char* facet = bytes.data() + kHeader + kFacet * f;
    std::array<std::uint32_t, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      std::array<float, 3> p{};
      std::memcpy(p.data(), facet + 12 + 12 * k, 12);  // skip the stored normal
      tri[k] = welder.add(p);
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

inline TriangleMesh load_stl_ascii(std::string_view text) {
  const auto tokens = split_ws(text);
  if (tokens.empty() || tokens[0] != "solid") throw Error(Errc::CorruptGeometry, "ASCII STL must start with 'solid'");
  TriangleMesh mesh;
  VertexWelder welder(mesh);
  std::vector<std::uint32_t> pending;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] != "vertex") continue;
    if (i + 3 >= tokens.size()) throw Error(Errc::CorruptGeometry, "truncated ASCII STL vertex");
    std::array<float, 3> p{};
    for (int k = 0; k < 3; ++k) p[k] = static_cast<float>(parse_double(tokens[i + 1 + k], "STL"));
    pending.push_back(welder.add(p));
    if (pending.size() == 3) {
      mesh.triangles.push_back({pending[0], pending[1], pending[2]});
      pending.clear();
    }
    i += 3;
  }
  if (!pending.empty()) throw Error(Errc::CorruptGeometry, "ASCII STL facet with fewer than 3 vertices");
  return mesh;
}

}  // namespace detail

/// Decodes mesh bytes in the declared format. STL vertices are welded on exact
/// float equality; OBJ vertex order is kept as written. Normals are dropped.
inline TriangleMesh load_mesh(std::string_view bytes, MeshFormat format) {
  switch (format) {
    case MeshFormat::Obj: return detail::load_obj(bytes);
    case MeshFormat::StlBinary: return detail::load_stl_binary(bytes);
    case MeshFormat::StlAscii: return detail::load_stl_ascii(bytes);
  }
  throw Error(Errc::UnsupportedFormat, "unknown mesh format");
}

/// Picks a format from the file extension; STL files are sniffed for the ASCII variant.
inline MeshFormat detect_mesh_format(const std::filesystem::path& path, std::string_view bytes) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".stl") {
    bool binary_size_matches = false;
    if (bytes.size() >= 84) {
      std::uint32_t count = 0;
      std::memcpy(&count, bytes.data() + 80, sizeof(count));
      binary_size_matches = bytes.size() == 84 + 50 * static_cast<std::size_t>(count);
    }
    if (bytes.substr(0, 5) == "solid" && !binary_size_matches) return MeshFormat::StlAscii;
    return MeshFormat::StlBinary;
  }
  throw Error(Errc::UnsupportedFormat, "unsupported mesh extension '" + ext + "'");
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TriangleMesh load_mesh_file(const std::filesystem::path& path,
                                   const Eigen::Vector3d& scale = Eigen::Vector3d::Ones()) {
  const std::string bytes = read_file_bytes(path);
  TriangleMesh mesh = load_mesh(bytes, detect_mesh_format(path, bytes));
  scale_mesh(mesh, scale);
  return mesh;
}

// Primitive tessellation. All shapes are centered on the local origin; the
// cylinder axis is local z, matching URDF.

inline TriangleMesh make_box(const Eigen::Vector3d& size) {
  TriangleMesh mesh;
  const Eigen::Vector3d h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  mesh.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                    {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return mesh;
}

inline TriangleMesh make_cylinder(double radius, double length, int segments = 32) {
  if (segments < 3) throw Error(Errc::InvalidArgument, "cylinder needs at least 3 segments");
  TriangleMesh mesh;
  const double hz = 0.5 * length;
  for (int s = 0; s < segments; ++s) {
    const double a = 2.0 * std::numbers::pi * s / segments;
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -hz);
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), hz);
  }
  const auto bottom = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, -hz);
  mesh.vertices.emplace_back(0.0, 0.0, hz);
  const auto top = bottom + 1;
  for (int s = 0; s < segments; ++s) {
    const auto a0 = static_cast<std::uint32_t>(2 * s);
    const auto a1 = static_cast<std::uint32_t>(2 * ((s + 1) % segments));
    mesh.triangles.push_back({a0, a1, a0 + 1});
    mesh.triangles.push_back({a1, a1 + 1, a0 + 1});
    mesh.triangles.push_back({bottom, a1, a0});
    mesh.triangles.push_back({top, a0 + 1, a1 + 1});
  }
  return mesh;
}

inline TriangleMesh make_sphere(double radius, int segments = 32) {
  if (segments < 3) throw Error(Errc::InvalidArgument, "sphere needs at least 3 segments");
  const int rings = std::max(2, segments / 2);
  TriangleMesh mesh;
  mesh.vertices.emplace_back(0.0, 0.0, radius);
  for (int r = 1; r < rings; ++r) {
    const double polar = std::numbers::pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double az = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.emplace_back(radius * std::sin(polar) * std::cos(az), radius * std::sin(polar) * std::sin(az),
                                 radius * std::cos(polar));
    }
  }
  mesh.vertices.emplace_back(0.0, 0.0, -radius);
  const auto south = static_cast<std::uint32_t>(mesh.vertices.size() - 1);
  auto ring = [segments](int r, int s) { return static_cast<std::uint32_t>(1 + (r - 1) * segments + (s % segments)); };
  for (int s = 0; s < segments; ++s) {
    mesh.triangles.push_back({0, ring(1, s), ring(1, s + 1)});
    for (int r = 1; r + 1 < rings; ++r) {
      mesh.triangles.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
      mesh.triangles.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
    }
    mesh.triangles.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
  }
  return mesh;
}

}  // namespace kinema
