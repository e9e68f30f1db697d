#pragma once

#include <hmpc/kinematics.hpp>

#include <vector>

namespace hmpc {

enum class TaskSelector { Position, Orientation, FullPose };

/// One level of an end-effector task hierarchy.
struct TaskSpec {
  int priority = 1;  // 1 is the highest
  TaskSelector selector = TaskSelector::FullPose;
  double k = 20.0;   // IK feedback gain
  Vec kp;            // OSC stiffness, one entry per task row
  Vec kd;            // OSC damping
};

/// Desired end-effector motion at one trajectory sample.
struct TaskTarget {
  Pose pose;
  Vec6 twist = Vec6::Zero();  // [linear; angular]
  Vec6 accel = Vec6::Zero();
};

inline int task_rows(TaskSelector s) { return s == TaskSelector::FullPose ? 6 : 3; }
inline int task_offset(TaskSelector s) { return s == TaskSelector::Orientation ? 3 : 0; }

/// Total row count of a hierarchy.
int task_dim(const std::vector<TaskSpec>& tasks);

/// Checks gains and priorities and returns the tasks sorted by priority.
std::vector<TaskSpec> sorted_tasks(std::vector<TaskSpec> tasks);

/// Position task over orientation task, the hierarchy used by the scenarios.
std::vector<TaskSpec> default_hierarchy();

}  // namespace hmpc
