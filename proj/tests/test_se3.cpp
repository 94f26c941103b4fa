#include <catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"

using namespace kinema;
namespace oracle = kinema::testing::oracle;

namespace {

RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return RigidTransform::from_xyz_rpy({u(rng), u(rng), u(rng)}, {u(rng), 0.5 * u(rng), u(rng)});
}

}  // namespace

TEST_CASE("rpy matches fixed-axis composition Rz Ry Rx") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d rpy(u(rng), u(rng), u(rng));
    const Eigen::Matrix3d expected = oracle::rot_z(rpy.z()) * oracle::rot_y(rpy.y()) * oracle::rot_x(rpy.x());
    const auto t = RigidTransform::from_xyz_rpy(Eigen::Vector3d::Zero(), rpy);
    CHECK((t.rotation_matrix() - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("rpy extraction inverts from_xyz_rpy away from gimbal lock") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d rpy(u(rng), 0.45 * u(rng), u(rng));
    const auto back = RigidTransform::from_xyz_rpy(Eigen::Vector3d::Zero(), rpy).rpy();
    CHECK((back - rpy).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("composition agrees with homogeneous matrices and inverse undoes it") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_transform(rng);
    const auto b = random_transform(rng);
    CHECK(((a * b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff() < 1e-13);
    const auto id = a * a.inverse();
    CHECK(id.translation.norm() < 1e-14);
    CHECK(std::abs(std::abs(id.rotation.w()) - 1.0) < 1e-14);
    const Eigen::Vector3d p(0.3, -1.2, 2.0);
    CHECK(((a * p) - (a.matrix() * p.homogeneous()).head<3>()).norm() < 1e-13);
  }
}

TEST_CASE("exp and log are inverse on rotation vectors below pi") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d w = Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized() * (3.0 * std::abs(u(rng)));
    CHECK((log_rotation(exp_rotation(w)) - w).norm() < 1e-12);
  }
  CHECK(log_rotation(Eigen::Quaterniond::Identity()).norm() == 0.0);
  CHECK(log_rotation(exp_rotation(Eigen::Vector3d(1e-12, 0, 0))).isApprox(Eigen::Vector3d(1e-12, 0, 0), 1e-9));
}

TEST_CASE("rotation error picks the shorter way round for either quaternion sign") {
  const Eigen::Quaterniond a(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond b(Eigen::AngleAxisd(0.1, Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond neg(-b.w(), -b.x(), -b.y(), -b.z());
  CHECK((rotation_error(a, b) - Eigen::Vector3d(0, 0, 0.2)).norm() < 1e-14);
  CHECK((rotation_error(a, neg) - Eigen::Vector3d(0, 0, 0.2)).norm() < 1e-14);
}

TEST_CASE("validity rejects non-unit quaternions and non-finite translations") {
  RigidTransform t;
  CHECK(t.is_valid());
  t.rotation = Eigen::Quaterniond(1.1, 0, 0, 0);
  CHECK_FALSE(t.is_valid());
  t.rotation = Eigen::Quaterniond::Identity();
  t.translation.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(t.is_valid());
}
