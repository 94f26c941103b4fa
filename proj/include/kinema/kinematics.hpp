#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "kinema/error.hpp"
#include "kinema/robot_model.hpp"
#include "kinema/se3.hpp"

namespace kinema {

/// Joint values aligned with RobotModel::actuated_order(); rad or m per joint.
using JointConfiguration = Eigen::VectorXd;

/// One pose per link, indexed like RobotModel::links().
using LinkPoses = std::vector<RigidTransform>;

struct LinkPoseSequence {
  std::vector<LinkPoses> frames;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t link_count() const { return frames.empty() ? 0 : frames.front().size(); }
};

using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

struct IkParams {
  double damping = 1e-3;
  int max_iterations = 100;
  double position_tolerance = 1e-4;  // m
  double rotation_tolerance = 1e-3;  // rad
  double step_scale = 1.0;
};

struct IkResult {
  JointConfiguration q;
  bool converged = false;
  double position_residual = 0.0;
  double rotation_residual = 0.0;
  int iterations = 0;
};

struct ClampEvent {
  std::size_t frame = 0;  // step or IK iteration that clamped
  std::size_t dof = 0;
  double requested = 0.0;
  double clamped = 0.0;
};

inline void check_dof(const RobotModel& model, const JointConfiguration& q, const char* what) {
  if (static_cast<std::size_t>(q.size()) != model.dof()) {
    throw Error(Errc::DofMismatch, std::string(what) + " has " + std::to_string(q.size()) + " values, model has " +
                                       std::to_string(model.dof()) + " actuated joints");
  }
}

inline std::size_t require_link(const RobotModel& model, std::string_view link) {
  const auto idx = model.link_index(link);
  if (idx == RobotModel::npos) throw Error(Errc::UnknownLink, "no link named '" + std::string(link) + "'");
  return idx;
}

/// Mid-range of each joint's limits; 0 where the joint is unlimited.
inline JointConfiguration default_seed(const RobotModel& model) {
  JointConfiguration q = JointConfiguration::Zero(static_cast<Eigen::Index>(model.dof()));
  for (std::size_t i = 0; i < model.dof(); ++i) {
    const auto& joint = model.joints()[model.actuated_joints()[i]];
    if (joint.limits) q[static_cast<Eigen::Index>(i)] = 0.5 * (joint.limits->lower + joint.limits->upper);
  }
  return q;
}

/// Hard clamp to joint limits, appending one event per clamped entry.
inline void clamp_to_limits(const RobotModel& model, JointConfiguration& q, std::size_t frame,
                            std::vector<ClampEvent>* events = nullptr) {
  for (std::size_t i = 0; i < model.dof(); ++i) {
    const auto& joint = model.joints()[model.actuated_joints()[i]];
    if (!joint.limits) continue;
    auto& v = q[static_cast<Eigen::Index>(i)];
    const double c = std::clamp(v, joint.limits->lower, joint.limits->upper);
    if (c != v) {
      if (events) events->push_back({frame, i, v, c});
      v = c;
    }
  }
}

inline RigidTransform joint_motion(const Joint& joint, double value) {
  switch (joint.kind) {
    case JointKind::Revolute:
    case JointKind::Continuous:
      return {Eigen::Quaterniond(Eigen::AngleAxisd(value, joint.axis)), Eigen::Vector3d::Zero()};
    case JointKind::Prismatic:
      return RigidTransform::from_translation(joint.axis * value);
    case JointKind::Fixed:
      break;
  }
  return RigidTransform::identity();
}

/// Pose of every link in the model's root frame: child = parent * origin * motion(q).
inline LinkPoses forward_kinematics(const RobotModel& model, const JointConfiguration& q) {
  check_dof(model, q, "joint configuration");
  LinkPoses poses(model.links().size());
  poses[model.root_index()] = RigidTransform::identity();
  for (const auto j : model.traversal_order()) {
    const Joint& joint = model.joints()[j];
    const auto slot = model.dof_index(j);
    const double value = slot == RobotModel::npos ? 0.0 : q[static_cast<Eigen::Index>(slot)];
    poses[model.child_link_of_joint(j)] = poses[model.parent_link_of_joint(j)] * joint.origin * joint_motion(joint, value);
  }
  return poses;
}

/// Geometric Jacobian of `link`'s origin in the root frame. Rows 0-2 are linear
/// velocity, rows 3-5 angular velocity; columns follow actuated_order() and are
/// zero for joints outside the root -> link chain.
inline Jacobian geometric_jacobian(const RobotModel& model, std::size_t link, const LinkPoses& poses) {
  Jacobian jac = Jacobian::Zero(6, static_cast<Eigen::Index>(model.dof()));
  const Eigen::Vector3d tip = poses[link].translation;
  for (const auto j : model.chain_to(link)) {
    const auto slot = model.dof_index(j);
    if (slot == RobotModel::npos) continue;
    const Joint& joint = model.joints()[j];
    const RigidTransform frame = poses[model.parent_link_of_joint(j)] * joint.origin;
    const Eigen::Vector3d axis = frame.rotation * joint.axis;
    const auto col = static_cast<Eigen::Index>(slot);
    if (joint.kind == JointKind::Prismatic) {
      jac.block<3, 1>(0, col) = axis;
    } else {
      jac.block<3, 1>(0, col) = axis.cross(tip - frame.translation);
      jac.block<3, 1>(3, col) = axis;
    }
  }
  return jac;
}

inline Jacobian geometric_jacobian(const RobotModel& model, std::string_view link, const JointConfiguration& q) {
  const auto idx = require_link(model, link);
  return geometric_jacobian(model, idx, forward_kinematics(model, q));
}

/// 6-vector pose error (translation, rotation log-map) taking `current` to `target`.
inline Eigen::Matrix<double, 6, 1> pose_error(const RigidTransform& target, const RigidTransform& current) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.translation - current.translation;
  e.tail<3>() = rotation_error(target.rotation, current.rotation);
  return e;
}

/// Damped least-squares IK seeded at `seed`. Always returns the best iterate
/// seen; `converged` tells whether it met both tolerances.
inline IkResult inverse_kinematics(const RobotModel& model, std::string_view ee_link, const RigidTransform& target,
                                   const JointConfiguration& seed, const IkParams& params = {}) {
  check_dof(model, seed, "IK seed");
  const auto link = require_link(model, ee_link);
  if (!(params.damping > 0.0) || params.max_iterations <= 0 || !(params.position_tolerance > 0.0) ||
      !(params.rotation_tolerance > 0.0) || !(params.step_scale > 0.0)) {
    throw Error(Errc::InvalidArgument, "IK parameters must be positive");
  }
  const double lambda_sq = params.damping * params.damping;

  IkResult best;
  double best_score = std::numeric_limits<double>::infinity();
  JointConfiguration q = seed;
  for (int it = 0;; ++it) {
    const LinkPoses poses = forward_kinematics(model, q);
    const auto err = pose_error(target, poses[link]);
    const double pos = err.head<3>().norm();
    const double rot = err.tail<3>().norm();
    const double score = pos / params.position_tolerance + rot / params.rotation_tolerance;
    if (score < best_score) {
      best_score = score;
      best = {q, false, pos, rot, it};
    }
    if (pos < params.position_tolerance && rot < params.rotation_tolerance) {
      return {q, true, pos, rot, it};
    }
    if (it == params.max_iterations) break;
    const Jacobian jac = geometric_jacobian(model, link, poses);
    const Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose() + lambda_sq * Eigen::Matrix<double, 6, 6>::Identity();
    const JointConfiguration dq = jac.transpose() * jjt.ldlt().solve(err);
    q += params.step_scale * dq;
    clamp_to_limits(model, q, static_cast<std::size_t>(it));
  }
  return best;
}

struct IntegrationResult {
  std::vector<JointConfiguration> trace;
  std::vector<ClampEvent> clamps;
};

/// Forward Euler: q_t = clamp(q_{t-1} + v_t * dt).
inline IntegrationResult integrate_velocities(const RobotModel& model, const JointConfiguration& initial,
                                              const std::vector<JointConfiguration>& velocities, double dt) {
  check_dof(model, initial, "initial configuration");
  if (!(dt > 0.0)) throw Error(Errc::NonpositiveDt, "dt must be positive, got " + std::to_string(dt));
  IntegrationResult out;
  out.trace.reserve(velocities.size());
  JointConfiguration q = initial;
  for (std::size_t t = 0; t < velocities.size(); ++t) {
    check_dof(model, velocities[t], "velocity vector");
    q += velocities[t] * dt;
    clamp_to_limits(model, q, t, &out.clamps);
    out.trace.push_back(q);
  }
  return out;
}

struct EndEffectorActions {
  std::string ee_link;
  std::vector<RigidTransform> targets;
  std::vector<double> gripper;              // optional, one per target
  std::vector<std::string> gripper_joints;  // actuated joints driven by the gripper value
};

struct JointSpaceActions {
  std::vector<JointConfiguration> configurations;
};

struct JointVelocityActions {
  std::vector<JointConfiguration> velocities;
  double dt = 0.0;
  JointConfiguration initial;
};

using ActionSequence = std::variant<EndEffectorActions, JointSpaceActions, JointVelocityActions>;

inline std::size_t action_length(const ActionSequence& actions) {
  return std::visit(
      [](const auto& a) -> std::size_t {
        using A = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<A, EndEffectorActions>) return a.targets.size();
        else if constexpr (std::is_same_v<A, JointSpaceActions>) return a.configurations.size();
        else return a.velocities.size();
      },
      actions);
}

struct IkFrameReport {
  bool converged = true;
  double position_residual = 0.0;
  double rotation_residual = 0.0;
  int iterations = 0;
};

struct TrajectoryExpansion {
  LinkPoseSequence poses;
  std::vector<JointConfiguration> joints;
  std::vector<IkFrameReport> ik;     // one per frame for end-effector actions, else empty
  std::vector<ClampEvent> clamps;
  std::vector<double> gripper;       // carried through when no gripper joint exists
};

/// Resolves q_t for every frame (direct, integrated, or IK seeded by q_{t-1})
/// and runs FK. IK failures are reported per frame and never abort the run.
inline TrajectoryExpansion expand_trajectory(const RobotModel& model, const ActionSequence& actions,
                                             const IkParams& params = {},
                                             const std::optional<JointConfiguration>& initial_seed = std::nullopt) {
  const std::size_t length = action_length(actions);
  if (length == 0) throw Error(Errc::EmptySequence, "action sequence has no frames");
  TrajectoryExpansion out;
  out.joints.reserve(length);

  if (const auto* ee = std::get_if<EndEffectorActions>(&actions)) {
    if (ee->ee_link.empty()) throw Error(Errc::UnknownLink, "end-effector actions need an ee_link");
    require_link(model, ee->ee_link);
    if (!ee->gripper.empty() && ee->gripper.size() != length) {
      throw Error(Errc::LengthMismatch, "gripper track length differs from target count");
    }
    std::vector<std::size_t> gripper_slots;
    for (const auto& name : ee->gripper_joints) {
      const auto j = model.joint_index(name);
      if (j == RobotModel::npos || model.dof_index(j) == RobotModel::npos) {
        throw Error(Errc::InvalidArgument, "gripper joint '" + name + "' is not an actuated joint");
      }
      gripper_slots.push_back(model.dof_index(j));
    }
    JointConfiguration seed = initial_seed.value_or(default_seed(model));
    check_dof(model, seed, "initial seed");
    for (std::size_t t = 0; t < length; ++t) {
      IkResult res = inverse_kinematics(model, ee->ee_link, ee->targets[t], seed, params);
      if (!ee->gripper.empty()) {
        for (auto slot : gripper_slots) res.q[static_cast<Eigen::Index>(slot)] = ee->gripper[t];
        clamp_to_limits(model, res.q, t, &out.clamps);
      }
      out.ik.push_back({res.converged, res.position_residual, res.rotation_residual, res.iterations});
      out.joints.push_back(res.q);
      seed = res.q;
    }
    if (gripper_slots.empty()) out.gripper = ee->gripper;
  } else if (const auto* js = std::get_if<JointSpaceActions>(&actions)) {
    for (std::size_t t = 0; t < length; ++t) {
      JointConfiguration q = js->configurations[t];
      check_dof(model, q, "joint-space action");
      clamp_to_limits(model, q, t, &out.clamps);
      out.joints.push_back(std::move(q));
    }
  } else {
    const auto& jv = std::get<JointVelocityActions>(actions);
    auto integrated = integrate_velocities(model, jv.initial, jv.velocities, jv.dt);
    out.joints = std::move(integrated.trace);
    out.clamps = std::move(integrated.clamps);
  }

  out.poses.frames.reserve(length);
  for (const auto& q : out.joints) out.poses.frames.push_back(forward_kinematics(model, q));
  return out;
}

/// Left-multiplies every pose by `calibration` (base frame -> reconstruction frame).
inline LinkPoseSequence apply_base_calibration(const RigidTransform& calibration, const LinkPoseSequence& poses) {
  LinkPoseSequence out = poses;
  for (auto& frame : out.frames) {
    for (auto& pose : frame) pose = calibration * pose;
  }
  return out;
}

}  // namespace kinema
