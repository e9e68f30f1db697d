#pragma once

#include <hmpc/common.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/task.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace hmpc {

/// Evenly sampled end-effector targets plus the hierarchy that tracks them.
struct TaskTrajectory {
  double dt = 1e-3;
  std::vector<TaskTarget> samples;
  std::vector<TaskSpec> tasks;
  Vec q_start;  // joint configuration the scenario starts from

  int size() const { return static_cast<int>(samples.size()); }
  double duration() const { return samples.empty() ? 0.0 : (size() - 1) * dt; }
  int final_index() const { return size() - 1; }

  /// Samples i .. i+len-1, repeating the last sample past the end.
  std::vector<TaskTarget> window(int i, int len) const;
};

struct SplineSamples {
  std::vector<Vec3> position;
  std::vector<Vec3> velocity;
  std::vector<Vec3> acceleration;
};

/// Cubic spline with zero end velocities through (times[i], points[i]),
/// sampled every dt from times.front() to times.back().
SplineSamples cubic_spline_position(const std::vector<double>& times, const std::vector<Vec3>& points, double dt);

/// Shortest-path slerp; s = 0 returns a exactly, s = 1 returns b up to sign.
Eigen::Quaterniond quaternion_interp(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b, double s);

/// Names accepted by scenario_trajectory.
const std::vector<std::string>& scenario_names();

/// payload_pick_place and singularity_pass use the 6-DOF desk model,
/// circle_2dof the planar arm. Throws std::invalid_argument on unknown names.
TaskTrajectory scenario_trajectory(std::string_view name, const RobotModel& model, double dt);

/// Joint configuration at the end of singularity_pass.
Vec singularity_pass_end();

/// CSV with columns t,px,py,pz,qw,qx,qy,qz.
std::string trajectory_to_csv(const TaskTrajectory& traj);
void write_trajectory_csv(const TaskTrajectory& traj, const std::string& path);

/// Reads the CSV written above. Twists and accelerations are rebuilt by
/// finite differences; tasks and q_start are left empty.
TaskTrajectory read_trajectory_csv(const std::string& path);
TaskTrajectory parse_trajectory_csv(const std::string& text);

}  // namespace hmpc
