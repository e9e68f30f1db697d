#pragma once

#include <hmpc/common.hpp>

#include <Eigen/Geometry>

#include <filesystem>
#include <string>
#include <vector>

namespace hmpc {

enum class JointKind { Revolute, Prismatic };

struct JointSpec {
  JointKind kind = JointKind::Revolute;
  Vec3 axis = Vec3::UnitZ();
  // Pose of the joint frame in the parent link frame at q = 0.
  Eigen::Isometry3d parent_transform = Eigen::Isometry3d::Identity();
  double q_min = -M_PI;
  double q_max = M_PI;
  double v_limit = 1.0;
  double u_limit = 1.0;
};

struct LinkInertia {
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  // About the center of mass, expressed in the link frame.
  Mat3 inertia = Mat3::Zero();
};

struct PayloadSpec {
  double mass = 0.0;
  // Center of mass in the end-effector frame.
  Vec3 com_offset = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();
};

/// Serial-chain manipulator: joint k moves link k relative to link k-1
/// (link -1 being the fixed base).
struct RobotModel {
  std::string name;
  std::vector<JointSpec> joints;
  std::vector<LinkInertia> links;
  Vec3 gravity{0.0, 0.0, -9.81};
  Eigen::Isometry3d ee_transform = Eigen::Isometry3d::Identity();

  int dof() const { return static_cast<int>(joints.size()); }

  Vec q_min() const;
  Vec q_max() const;
  Vec v_limit() const;
  Vec u_limit() const;
};

/// Rotation from intrinsic XYZ Euler angles (R = Rx * Ry * Rz).
Mat3 rpy_to_rotation(const Vec3& rpy);

/// Throws ModelError naming the first violated invariant.
void validate(const RobotModel& model);
void validate(const PayloadSpec& payload);

RobotModel parse_model(const std::string& json_text);
RobotModel load_model(const std::filesystem::path& path);
std::string model_to_json(const RobotModel& model);

/// Rigidly merges the payload into the last link (parallel-axis theorem).
RobotModel attach_payload(const RobotModel& model, const PayloadSpec& payload);
/// Inverse of attach_payload for the same payload.
RobotModel detach_payload(const RobotModel& model, const PayloadSpec& payload);

}  // namespace hmpc
