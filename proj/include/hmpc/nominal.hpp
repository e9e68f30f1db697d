#pragma once

#include <hmpc/common.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/task.hpp>

#include <optional>
#include <vector>

namespace hmpc {

/// Pseudoinverse from the SVD with singular values below
/// rel_threshold * sigma_max discarded. All-zero input gives a zero matrix.
Mat compact_svd_pinv(const Mat& J, double rel_threshold);

/// Per-level quantities of the prioritized recursion, kept for inspection.
struct IkLevel {
  Mat J;            // task Jacobian rows
  Mat J_projected;  // J * N_{j-1}
  Mat N_after;      // projector after this level
  Vec correction;   // qd_j - qd_{j-1}
  Vec error;        // task error rows
};

/// Projected task Jacobians and errors of a whole hierarchy at one q.
struct TaskStack {
  Mat J;  // rows of every level stacked, each level projected by its predecessors
  Vec e;  // matching error rows
};

TaskStack task_stack(const RobotModel& model, const Vec& q, const std::vector<TaskSpec>& tasks,
                     const Pose& target, double rel_threshold);

/// Joint velocity from the null-space recursion starting at qd = 0. Tasks
/// must be sorted by priority; all of them track the same target pose.
Vec prioritized_ik_step(const RobotModel& model, const Vec& q, const std::vector<TaskSpec>& tasks,
                        const Pose& target, double rel_threshold,
                        std::vector<IkLevel>* levels = nullptr);

/// Horizon-length nominal trajectory. IK rollouts fill q_hat and qd_hat;
/// OSC rollouts also fill u_hat and x_hat.
struct NominalRollout {
  std::vector<Vec> q_hat;   // n_p + 1
  std::vector<Vec> qd_hat;  // n_p + 1
  std::vector<Vec> u_hat;   // n_p
  std::vector<Vec> x_hat;   // n_p + 1, [q; qd]
  std::vector<Mat> J_hat;   // n_p + 1 stacked projected task Jacobians
  std::vector<Vec> e_hat;   // n_p + 1 stacked task errors

  int horizon() const { return static_cast<int>(q_hat.size()) - 1; }
};

/// q_{k+1} = q_k + dt * prioritized_ik_step(q_k, window[k]).
NominalRollout ik_rollout(const RobotModel& model, const Vec& q0, const std::vector<TaskTarget>& window,
                          const std::vector<TaskSpec>& tasks, double dt, double rel_threshold);

struct Posture {
  Vec q_des;
  Vec kp;
  Vec kd;
};

/// Hierarchical operational-space torque with bias compensation. The posture
/// impedance acts in the null space of every task.
Vec osc_torque(const RobotModel& model, const Vec& q, const Vec& qd, const std::vector<TaskSpec>& tasks,
               const TaskTarget& target, const std::optional<Posture>& posture, double rel_threshold);

/// Semi-implicit Euler rollout under clamped osc_torque.
NominalRollout osc_rollout(const RobotModel& model, const Vec& q0, const Vec& qd0,
                           const std::vector<TaskTarget>& window, const std::vector<TaskSpec>& tasks,
                           const std::optional<Posture>& posture, double dt, double rel_threshold);

/// Element-wise clamp to the model torque limits.
Vec clamp_torque(const RobotModel& model, const Vec& u);

}  // namespace hmpc
