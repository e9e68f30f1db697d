#pragma once

#include <hmpc/common.hpp>
#include <hmpc/robot_model.hpp>

#include <Eigen/Geometry>

namespace hmpc {

/// End-effector pose. The quaternion is kept unit-norm with w >= 0.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& r, const Vec3& t);
  Pose(const Mat3& r, const Vec3& t);

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
};

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q);

/// [position error (m); orientation error as rotation vector (rad)].
struct TaskError {
  Vec6 value = Vec6::Zero();

  auto position() const { return value.head<3>(); }
  auto orientation() const { return value.tail<3>(); }
};

/// Rotation vector of R with norm in [0, pi]. At exactly pi the axis sign is
/// fixed so that its largest-magnitude component is positive.
Vec3 rotation_log(const Mat3& R);
Mat3 rotation_exp(const Vec3& w);

Pose forward_kinematics(const RobotModel& model, const Vec& q);

/// World-frame geometric Jacobian of the end-effector: rows 0-2 linear
/// velocity, rows 3-5 angular velocity.
Mat6X geometric_jacobian(const RobotModel& model, const Vec& q);

/// Time derivative of the geometric Jacobian along (q, qd).
Mat6X jacobian_dot(const RobotModel& model, const Vec& q, const Vec& qd);

TaskError task_error(const Pose& target, const Pose& current);

/// Applies a task error as a twist: translation += e_pos, R = exp(e_ori) * R.
Pose apply_error(const Pose& current, const TaskError& err);

struct EeKinematics {
  Pose pose;
  Mat6X jacobian;
};

/// Pose and Jacobian from a single chain pass.
EeKinematics ee_kinematics(const RobotModel& model, const Vec& q);

}  // namespace hmpc
