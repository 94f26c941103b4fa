#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"

using namespace kinema;
using namespace kinema::testing;

namespace {

Errc parse_error(const std::string& urdf) {
  try {
    parse_urdf(urdf);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected parse_urdf to throw");
  return Errc::IoFailure;
}

std::string two_links(const std::string& joint) {
  return "<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/>" + joint + "</robot>";
}

}  // namespace

TEST_CASE("planar arm parses into an ordered tree") {
  const auto model = parse_urdf(planar_2r_urdf());
  CHECK(model.name() == "planar2r");
  CHECK(model.links().size() == 4);
  CHECK(model.dof() == 2);
  CHECK(model.root_link() == "base");
  CHECK(model.actuated_order() == std::vector<std::string>{"j1", "j2"});
  const auto tip = model.link_index("tip");
  REQUIRE(tip != RobotModel::npos);
  CHECK(model.chain_to(tip).size() == 3);
  CHECK(model.dof_index(model.joint_index("tip_joint")) == RobotModel::npos);
  const auto& j1 = model.joints()[model.joint_index("j1")];
  REQUIRE(j1.limits.has_value());
  CHECK(j1.limits->lower == -3.14159);
  CHECK(validate(model).empty());
}

TEST_CASE("traversal visits every parent joint before its children") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    const auto tree = random_tree(rng);
    const auto model = parse_urdf(tree.urdf());
    std::vector<bool> placed(model.links().size(), false);
    placed[model.root_index()] = true;
    for (auto j : model.traversal_order()) {
      CHECK(placed[model.parent_link_of_joint(j)]);
      placed[model.child_link_of_joint(j)] = true;
    }
    CHECK(std::all_of(placed.begin(), placed.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("structural errors carry their codes") {
  CHECK(parse_error("<robot><link name=\"a\">") == Errc::MalformedXml);
  CHECK(parse_error("<robt name=\"x\"/>") == Errc::MalformedXml);
  CHECK(parse_error(two_links("<joint name=\"j\" type=\"screw\"><parent link=\"a\"/><child link=\"b\"/></joint>")) ==
        Errc::UnknownJointType);
  CHECK(parse_error(two_links("<joint name=\"j\" type=\"fixed\"><parent link=\"a\"/><child link=\"c\"/></joint>")) ==
        Errc::MissingLink);
  CHECK(parse_error(two_links("")) == Errc::DisconnectedTree);
  CHECK(parse_error(two_links("<joint name=\"j\" type=\"fixed\"><parent link=\"a\"/><child link=\"b\"/></joint>"
                              "<joint name=\"k\" type=\"fixed\"><parent link=\"b\"/><child link=\"a\"/></joint>")) ==
        Errc::KinematicCycle);
  CHECK(parse_error("<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/><link name=\"c\"/>"
                    "<joint name=\"j\" type=\"fixed\"><parent link=\"a\"/><child link=\"b\"/></joint>"
                    "<joint name=\"k\" type=\"fixed\"><parent link=\"c\"/><child link=\"b\"/></joint></robot>") ==
        Errc::KinematicCycle);
}

TEST_CASE("unsupported elements become warnings, not errors") {
  const auto model = parse_urdf(
      "<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/><gazebo/><transmission name=\"t\"/>"
      "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/><axis xyz=\"0 0 1\"/>"
      "<limit lower=\"-1\" upper=\"1\"/><dynamics damping=\"0.1\"/><mimic joint=\"x\"/></joint></robot>");
  CHECK(model.warnings().size() == 4);
  CHECK(model.dof() == 1);
}

TEST_CASE("validate reports value-level problems") {
  const auto model = parse_urdf(two_links(
      "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/><axis xyz=\"0 0 2\"/>"
      "<limit lower=\"1\" upper=\"-1\"/></joint>"));
  const auto diags = validate(model);
  REQUIRE(diags.size() == 2);
  CHECK(diags[0].element == "joint:j");
}

TEST_CASE("primitive visuals are tessellated at parse time") {
  const auto model = parse_urdf(arm6_urdf(), UrdfOptions{16});
  for (const auto& link : model.links()) {
    for (const auto& v : link.visuals) {
      REQUIRE(v.mesh);
      CHECK(v.mesh->is_valid());
      CHECK(!v.mesh->triangles.empty());
    }
  }
  const auto& box = model.links()[model.link_index("tool0")].visuals.front().mesh;
  CHECK(box->vertices.size() == 8);
  CHECK(box->triangles.size() == 12);
}

TEST_CASE("serialization round-trips structure and origins") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto model = parse_urdf(random_tree(rng).urdf());
    const auto again = parse_urdf(to_urdf(model));
    REQUIRE(again.joints().size() == model.joints().size());
    CHECK(again.actuated_order() == model.actuated_order());
    for (std::size_t j = 0; j < model.joints().size(); ++j) {
      const auto& a = model.joints()[j];
      const auto& b = again.joints()[j];
      CHECK(a.kind == b.kind);
      CHECK(a.parent == b.parent);
      CHECK(a.child == b.child);
      CHECK((a.origin.matrix() - b.origin.matrix()).cwiseAbs().maxCoeff() < 1e-12);
      if (a.is_actuated()) CHECK((a.axis - b.axis).norm() == 0.0);
      CHECK(a.limits.has_value() == b.limits.has_value());
    }
  }
}

TEST_CASE("mesh references resolve through a package directory with scale") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "kinema_resolver_test";
  fs::create_directories(dir / "meshes");
  {
    std::ofstream obj(dir / "meshes" / "tri.obj");
    obj << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
  }
  const auto model = parse_urdf(
      "<robot name=\"r\"><link name=\"a\"><visual><geometry>"
      "<mesh filename=\"package://pkg/meshes/tri.obj\" scale=\"2 3 4\"/></geometry></visual></link></robot>");
  REQUIRE_FALSE(model.links()[0].visuals[0].mesh);
  const auto resolved = resolve_meshes(model, directory_mesh_resolver(dir));
  const auto& mesh = *resolved.links()[0].visuals[0].mesh;
  REQUIRE(mesh.vertices.size() == 3);
  CHECK(mesh.vertices[1] == Eigen::Vector3d(2, 0, 0));
  CHECK(mesh.vertices[2] == Eigen::Vector3d(0, 3, 0));

  const auto missing = parse_urdf(
      "<robot name=\"r\"><link name=\"a\"><visual><geometry>"
      "<mesh filename=\"package://pkg/none.stl\"/></geometry></visual></link></robot>");
  try {
    resolve_meshes(missing, directory_mesh_resolver(dir));
    FAIL("expected UnresolvedMesh");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnresolvedMesh);
  }
  fs::remove_all(dir);
}
