#pragma once

#include <algorithm>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "kinema/error.hpp"
#include "kinema/mesh.hpp"
#include "kinema/se3.hpp"

namespace kinema {

enum class JointKind { Revolute, Continuous, Prismatic, Fixed };

constexpr std::string_view to_string(JointKind kind) noexcept {
  switch (kind) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Continuous: return "continuous";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Fixed: return "fixed";
  }
  return "fixed";
}

/// Radians for revolute joints, meters for prismatic ones.
struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
};

struct Joint {
  std::string name;
  JointKind kind = JointKind::Fixed;
  std::string parent;
  std::string child;
  RigidTransform origin;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  std::optional<JointLimits> limits;  // absent: unlimited (continuous joints always)

  bool is_actuated() const { return kind != JointKind::Fixed; }
};

struct BoxGeometry {
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
};
struct CylinderGeometry {
  double radius = 0.0;
  double length = 0.0;
};
struct SphereGeometry {
  double radius = 0.0;
};
struct MeshGeometry {
  std::string filename;
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
};
using Geometry = std::variant<BoxGeometry, CylinderGeometry, SphereGeometry, MeshGeometry>;

/// One visual element of a link. `mesh` holds the triangulated geometry in the
/// visual's own frame; it is null for mesh files that have not been resolved yet.
struct Visual {
  RigidTransform origin;
  Geometry geometry;
  std::shared_ptr<const TriangleMesh> mesh;
};

struct Link {
  std::string name;
  std::vector<Visual> visuals;
};

/// Validated kinematic tree. Construct through RobotModel::build or parse_urdf;
/// the instance is immutable afterwards and safe to share across threads.
class RobotModel {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Checks the tree structure and builds lookup tables. Throws MissingLink,
  /// KinematicCycle or DisconnectedTree. Value-level problems (limits, axes)
  /// are left for validate().
  static RobotModel build(std::string name, std::vector<Link> links, std::vector<Joint> joints,
                          std::vector<std::string> warnings = {}) {
    RobotModel m;
    m.name_ = std::move(name);
    m.links_ = std::move(links);
    m.joints_ = std::move(joints);
    m.warnings_ = std::move(warnings);
    m.index();
    return m;
  }

  const std::string& name() const { return name_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::string& root_link() const { return links_[root_].name; }
  std::size_t root_index() const { return root_; }

  /// Names of the non-fixed joints in document order; JointConfiguration
  /// entries follow this order.
  std::vector<std::string> actuated_order() const {
    std::vector<std::string> out;
    out.reserve(actuated_.size());
    for (auto j : actuated_) out.push_back(joints_[j].name);
    return out;
  }
  const std::vector<std::size_t>& actuated_joints() const { return actuated_; }
  std::size_t dof() const { return actuated_.size(); }

  /// Joints sorted so that every parent joint precedes its children.
  const std::vector<std::size_t>& traversal_order() const { return traversal_; }

  std::size_t link_index(std::string_view link) const {
    auto it = link_lookup_.find(std::string(link));
    return it == link_lookup_.end() ? npos : it->second;
  }
  std::size_t joint_index(std::string_view joint) const {
    auto it = joint_lookup_.find(std::string(joint));
    return it == joint_lookup_.end() ? npos : it->second;
  }
  /// Position of a joint inside actuated_order(), npos for fixed joints.
  std::size_t dof_index(std::size_t joint) const { return dof_slot_[joint]; }
  /// Joint whose child is `link`; npos for the root.
  std::size_t parent_joint(std::size_t link) const { return parent_joint_[link]; }
  std::size_t parent_link_of_joint(std::size_t joint) const { return joint_parent_link_[joint]; }
  std::size_t child_link_of_joint(std::size_t joint) const { return joint_child_link_[joint]; }

  /// Joints on the path root -> link, root side first.
  std::vector<std::size_t> chain_to(std::size_t link) const {
    std::vector<std::size_t> chain;
    for (std::size_t l = link; parent_joint_[l] != npos; l = joint_parent_link_[parent_joint_[l]]) {
      chain.push_back(parent_joint_[l]);
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
  }

  /// Same model with new visual lists (used by mesh resolution).
  RobotModel with_links(std::vector<Link> links) const {
    RobotModel copy = *this;
    copy.links_ = std::move(links);
    return copy;
  }

 private:
  void index() {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (!link_lookup_.emplace(links_[i].name, i).second) {
        throw Error(Errc::InvalidArgument, "duplicate link '" + links_[i].name + "'");
      }
    }
    if (links_.empty()) throw Error(Errc::InvalidArgument, "robot '" + name_ + "' has no links");
    parent_joint_.assign(links_.size(), npos);
    dof_slot_.assign(joints_.size(), npos);
    joint_parent_link_.resize(joints_.size());
    joint_child_link_.resize(joints_.size());
    std::vector<std::vector<std::size_t>> children(links_.size());
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      const Joint& joint = joints_[j];
      if (!joint_lookup_.emplace(joint.name, j).second) {
        throw Error(Errc::InvalidArgument, "duplicate joint '" + joint.name + "'");
      }
      const auto p = link_index(joint.parent);
      const auto c = link_index(joint.child);
      if (p == npos) throw Error(Errc::MissingLink, "joint '" + joint.name + "' parent '" + joint.parent + "'");
      if (c == npos) throw Error(Errc::MissingLink, "joint '" + joint.name + "' child '" + joint.child + "'");
      if (parent_joint_[c] != npos) {
        throw Error(Errc::KinematicCycle, "link '" + joint.child + "' has more than one parent joint");
      }
      parent_joint_[c] = j;
      joint_parent_link_[j] = p;
      joint_child_link_[j] = c;
      children[p].push_back(j);
      if (joint.is_actuated()) {
        dof_slot_[j] = actuated_.size();
        actuated_.push_back(j);
      }
    }
    std::vector<std::size_t> roots;
    for (std::size_t l = 0; l < links_.size(); ++l) {
      if (parent_joint_[l] == npos) roots.push_back(l);
    }
    if (roots.empty()) throw Error(Errc::KinematicCycle, "every link has a parent joint");
    if (roots.size() > 1) {
      throw Error(Errc::DisconnectedTree,
                  "links '" + links_[roots[0]].name + "' and '" + links_[roots[1]].name + "' both lack a parent");
    }
    root_ = roots.front();
    std::deque<std::size_t> queue{root_};
    std::size_t visited = 0;
    while (!queue.empty()) {
      const auto l = queue.front();
      queue.pop_front();
      ++visited;
      for (auto j : children[l]) {
        traversal_.push_back(j);
        queue.push_back(joint_child_link_[j]);
      }
    }
    if (visited != links_.size()) throw Error(Errc::KinematicCycle, "links unreachable from root form a cycle");
  }

  std::string name_;
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::vector<std::string> warnings_;
  std::size_t root_ = 0;
  std::vector<std::size_t> actuated_;
  std::vector<std::size_t> traversal_;
  std::vector<std::size_t> parent_joint_;
  std::vector<std::size_t> dof_slot_;
  std::vector<std::size_t> joint_parent_link_;
  std::vector<std::size_t> joint_child_link_;
  std::unordered_map<std::string, std::size_t> link_lookup_;
  std::unordered_map<std::string, std::size_t> joint_lookup_;
};

struct UrdfOptions {
  int tessellation_segments = 32;  // cylinders and spheres
};

inline std::shared_ptr<const TriangleMesh> tessellate(const Geometry& geometry, int segments) {
  struct Visitor {
    int segments;
    std::shared_ptr<const TriangleMesh> operator()(const BoxGeometry& g) const {
      return std::make_shared<TriangleMesh>(make_box(g.size));
    }
    std::shared_ptr<const TriangleMesh> operator()(const CylinderGeometry& g) const {
      return std::make_shared<TriangleMesh>(make_cylinder(g.radius, g.length, segments));
    }
    std::shared_ptr<const TriangleMesh> operator()(const SphereGeometry& g) const {
      return std::make_shared<TriangleMesh>(make_sphere(g.radius, segments));
    }
    std::shared_ptr<const TriangleMesh> operator()(const MeshGeometry&) const { return nullptr; }
  };
  return std::visit(Visitor{segments}, geometry);
}

namespace detail {

using boost::property_tree::ptree;

inline std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& where) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::vector<double> values;
  double v = 0.0;
  while (in >> v) values.push_back(v);
  if (!in.eof() || values.size() != expected) {
    throw Error(Errc::MalformedXml, where + ": expected " + std::to_string(expected) + " numbers, got '" + text + "'");
  }
  return values;
}

inline Eigen::Vector3d parse_vec3(const std::string& text, const std::string& where) {
  const auto v = parse_numbers(text, 3, where);
  return {v[0], v[1], v[2]};
}

inline RigidTransform parse_origin(const ptree& element, const std::string& where) {
  const auto origin = element.get_child_optional("origin");
  if (!origin) return RigidTransform::identity();
  const auto xyz = origin->get<std::string>("<xmlattr>.xyz", "0 0 0");
  const auto rpy = origin->get<std::string>("<xmlattr>.rpy", "0 0 0");
  return RigidTransform::from_xyz_rpy(parse_vec3(xyz, where + " origin xyz"), parse_vec3(rpy, where + " origin rpy"));
}

inline std::string required_attr(const ptree& element, const std::string& attr, const std::string& where) {
  auto value = element.get_optional<std::string>("<xmlattr>." + attr);
  if (!value) throw Error(Errc::MalformedXml, where + " is missing attribute '" + attr + "'");
  return *value;
}

inline double parse_scalar(const std::string& text, const std::string& where) {
  return parse_numbers(text, 1, where).front();
}

inline Geometry parse_geometry(const ptree& geometry, const std::string& where) {
  for (const auto& [tag, node] : geometry) {
    if (tag == "box") return BoxGeometry{parse_vec3(required_attr(node, "size", where + " box"), where + " box")};
    if (tag == "cylinder") {
      return CylinderGeometry{parse_scalar(required_attr(node, "radius", where), where + " cylinder radius"),
                              parse_scalar(required_attr(node, "length", where), where + " cylinder length")};
    }
    if (tag == "sphere") return SphereGeometry{parse_scalar(required_attr(node, "radius", where), where + " sphere")};
    if (tag == "mesh") {
      MeshGeometry mesh{required_attr(node, "filename", where + " mesh"), Eigen::Vector3d::Ones()};
      if (auto scale = node.get_optional<std::string>("<xmlattr>.scale")) mesh.scale = parse_vec3(*scale, where);
      return mesh;
    }
  }
  throw Error(Errc::MalformedXml, where + " has no supported geometry");
}

inline JointKind parse_joint_kind(const std::string& type, const std::string& joint) {
  if (type == "revolute") return JointKind::Revolute;
  if (type == "continuous") return JointKind::Continuous;
  if (type == "prismatic") return JointKind::Prismatic;
  if (type == "fixed") return JointKind::Fixed;
  throw Error(Errc::UnknownJointType, "joint '" + joint + "' has type '" + type + "'");
}

}  // namespace detail

/// Parses a pre-expanded URDF document. Only visual geometry is kept; other
/// elements are skipped and listed in RobotModel::warnings().
inline RobotModel parse_urdf(std::string_view document, const UrdfOptions& options = {}) {
  using detail::ptree;
  ptree tree;
  try {
    std::istringstream in{std::string(document)};
    boost::property_tree::read_xml(in, tree, boost::property_tree::xml_parser::no_comments);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(Errc::MalformedXml, e.what());
  }
  const ptree* robot = nullptr;
  for (const auto& [tag, node] : tree) {
    if (tag == "robot") {
      if (robot) throw Error(Errc::MalformedXml, "more than one <robot> element");
      robot = &node;
    } else if (tag != "<xmlcomment>") {
      throw Error(Errc::MalformedXml, "unexpected top-level element <" + tag + ">");
    }
  }
  if (!robot) throw Error(Errc::MalformedXml, "no <robot> element");

  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<std::string> warnings;
  for (const auto& [tag, node] : *robot) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    if (tag == "link") {
      Link link{detail::required_attr(node, "name", "<link>"), {}};
      for (const auto& [child_tag, child] : node) {
        if (child_tag != "visual") continue;
        const std::string where = "link '" + link.name + "' visual";
        auto geometry = child.get_child_optional("geometry");
        if (!geometry) throw Error(Errc::MalformedXml, where + " without <geometry>");
        Visual visual{detail::parse_origin(child, where), detail::parse_geometry(*geometry, where), nullptr};
        visual.mesh = tessellate(visual.geometry, options.tessellation_segments);
        link.visuals.push_back(std::move(visual));
      }
      links.push_back(std::move(link));
    } else if (tag == "joint") {
      Joint joint;
      joint.name = detail::required_attr(node, "name", "<joint>");
      const std::string where = "joint '" + joint.name + "'";
      joint.kind = detail::parse_joint_kind(detail::required_attr(node, "type", where), joint.name);
      auto parent = node.get_child_optional("parent");
      auto child = node.get_child_optional("child");
      if (!parent || !child) throw Error(Errc::MalformedXml, where + " needs <parent> and <child>");
      joint.parent = detail::required_attr(*parent, "link", where + " parent");
      joint.child = detail::required_attr(*child, "link", where + " child");
      joint.origin = detail::parse_origin(node, where);
      if (auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz")) {
        joint.axis = detail::parse_vec3(*axis, where + " axis");
      }
      if (auto limit = node.get_child_optional("limit");
          limit && (joint.kind == JointKind::Revolute || joint.kind == JointKind::Prismatic)) {
        joint.limits = JointLimits{detail::parse_scalar(limit->get<std::string>("<xmlattr>.lower", "0"), where),
                                   detail::parse_scalar(limit->get<std::string>("<xmlattr>.upper", "0"), where)};
      }
      for (const auto& [child_tag, unused] : node) {
        if (child_tag == "mimic" || child_tag == "dynamics" || child_tag == "safety_controller" ||
            child_tag == "calibration") {
          warnings.push_back(where + ": <" + child_tag + "> ignored");
        }
      }
      joints.push_back(std::move(joint));
    } else if (tag != "material") {
      warnings.push_back("<" + tag + "> ignored");
    }
  }
  return RobotModel::build(robot->get<std::string>("<xmlattr>.name", ""), std::move(links), std::move(joints),
                           std::move(warnings));
}

inline RobotModel parse_urdf_file(const std::filesystem::path& path, const UrdfOptions& options = {}) {
  return parse_urdf(read_file_bytes(path), options);
}

/// Loads every unresolved mesh reference through `resolver` (scale applied by
/// the resolver's caller contract: resolve_meshes applies MeshGeometry::scale).
inline RobotModel resolve_meshes(const RobotModel& model,
                                 const std::function<TriangleMesh(const std::string& filename)>& resolver) {
  std::vector<Link> links = model.links();
  for (auto& link : links) {
    for (auto& visual : link.visuals) {
      if (visual.mesh) continue;
      const auto& geometry = std::get<MeshGeometry>(visual.geometry);
      TriangleMesh mesh = resolver(geometry.filename);
      scale_mesh(mesh, geometry.scale);
      visual.mesh = std::make_shared<TriangleMesh>(std::move(mesh));
    }
  }
  return model.with_links(std::move(links));
}

/// Maps package:// and file:// URIs onto a directory: package://pkg/a/b.stl is
/// looked up as <root>/pkg/a/b.stl, then <root>/a/b.stl.
inline std::function<TriangleMesh(const std::string&)> directory_mesh_resolver(std::filesystem::path root) {
  return [root = std::move(root)](const std::string& filename) {
    namespace fs = std::filesystem;
    std::vector<fs::path> candidates;
    std::string_view name = filename;
    if (name.starts_with("package://")) {
      name.remove_prefix(10);
      candidates.push_back(root / fs::path(name));
      if (auto slash = name.find('/'); slash != std::string_view::npos) {
        candidates.push_back(root / fs::path(name.substr(slash + 1)));
      }
    } else {
      if (name.starts_with("file://")) name.remove_prefix(7);
      fs::path p(name);
      candidates.push_back(p.is_absolute() ? p : root / p);
    }
    for (const auto& c : candidates) {
      if (fs::exists(c)) return load_mesh_file(c);
    }
    throw Error(Errc::UnresolvedMesh, "mesh '" + filename + "' not found under " + root.string());
  };
}

struct Diagnostic {
  std::string element;
  std::string message;
};

/// Checks every value-level invariant of a model. Empty result means valid.
inline std::vector<Diagnostic> validate(const RobotModel& model) {
  std::vector<Diagnostic> out;
  for (const auto& joint : model.joints()) {
    const std::string element = "joint:" + joint.name;
    if (!joint.origin.is_valid()) out.push_back({element, "origin is not a valid rigid transform"});
    if (!joint.is_actuated()) continue;
    if (!joint.axis.allFinite() || std::abs(joint.axis.norm() - 1.0) > 1e-9) {
      out.push_back({element, "axis is not unit length"});
    }
    if (joint.limits && !(joint.limits->lower <= joint.limits->upper)) {
      out.push_back({element, "lower limit exceeds upper limit"});
    }
  }
  for (const auto& link : model.links()) {
    for (std::size_t v = 0; v < link.visuals.size(); ++v) {
      const std::string element = "link:" + link.name + "/visual:" + std::to_string(v);
      const auto& visual = link.visuals[v];
      if (!visual.origin.is_valid()) out.push_back({element, "visual origin is not a valid rigid transform"});
      if (visual.mesh && !visual.mesh->is_valid()) out.push_back({element, "mesh indices or colors inconsistent"});
    }
  }
  return out;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_vec(const Eigen::Vector3d& v) {
  return fmt_num(v.x()) + " " + fmt_num(v.y()) + " " + fmt_num(v.z());
}

inline std::string fmt_origin(const RigidTransform& t) {
  return "<origin xyz=\"" + fmt_vec(t.translation) + "\" rpy=\"" + fmt_vec(t.rpy()) + "\"/>";
}

}  // namespace detail

/// Writes the supported URDF subset back out.
inline std::string to_urdf(const RobotModel& model) {
  using detail::fmt_num;
  using detail::fmt_vec;
  std::ostringstream out;
  out << "<?xml version=\"1.0\"?>\n<robot name=\"" << model.name() << "\">\n";
  for (const auto& link : model.links()) {
    out << "  <link name=\"" << link.name << "\">\n";
    for (const auto& visual : link.visuals) {
      out << "    <visual>\n      " << detail::fmt_origin(visual.origin) << "\n      <geometry>";
      std::visit(
          [&out](const auto& g) {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, BoxGeometry>) {
              out << "<box size=\"" << fmt_vec(g.size) << "\"/>";
            } else if constexpr (std::is_same_v<G, CylinderGeometry>) {
              out << "<cylinder radius=\"" << fmt_num(g.radius) << "\" length=\"" << fmt_num(g.length) << "\"/>";
            } else if constexpr (std::is_same_v<G, SphereGeometry>) {
              out << "<sphere radius=\"" << fmt_num(g.radius) << "\"/>";
            } else {
              out << "<mesh filename=\"" << g.filename << "\" scale=\"" << fmt_vec(g.scale) << "\"/>";
            }
          },
          visual.geometry);
      out << "</geometry>\n    </visual>\n";
    }
    out << "  </link>\n";
  }
  for (const auto& joint : model.joints()) {
    out << "  <joint name=\"" << joint.name << "\" type=\"" << to_string(joint.kind) << "\">\n"
        << "    <parent link=\"" << joint.parent << "\"/>\n    <child link=\"" << joint.child << "\"/>\n"
        << "    " << detail::fmt_origin(joint.origin) << "\n";
    if (joint.is_actuated()) out << "    <axis xyz=\"" << fmt_vec(joint.axis) << "\"/>\n";
    if (joint.limits) {
      out << "    <limit lower=\"" << fmt_num(joint.limits->lower) << "\" upper=\"" << fmt_num(joint.limits->upper)
          << "\" effort=\"0\" velocity=\"0\"/>\n";
    }
    out << "  </joint>\n";
  }
  out << "</robot>\n";
  return out.str();
}

}  // namespace kinema
