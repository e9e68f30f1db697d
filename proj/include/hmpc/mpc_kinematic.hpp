#pragma once

#include <hmpc/common.hpp>
#include <hmpc/nominal.hpp>
#include <hmpc/qp_solver.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/trajgen.hpp>

#include <vector>

namespace hmpc {

/// Where the fixed first block of the position stack comes from.
enum class AnchorMode {
  Measured,  // measured joint positions, history from past measurements
  Command,   // previous command, history from past commands
};

struct KinMpcConfig {
  int n_p = 10;
  double dt = 1e-3;
  Mat Q_e;  // task rows x task rows
  Mat Q_d;  // n x n, joint velocity
  Mat Q_a;  // n x n, joint acceleration
  Vec eps_q;  // terminal position box half-widths
  Vec eps_v;  // terminal velocity box half-widths
  double svd_threshold = 1e-2;
  AnchorMode anchor = AnchorMode::Command;
  /// Command mode falls back to the measurement when the two differ by more
  /// than this (max norm, rad).
  double reanchor_tol = 0.25;

  /// Q_e = 2000 I, Q_d = 0.01 I, Q_a = 0, eps_q = 1e-2, eps_v = 5e-2.
  static KinMpcConfig defaults(int n, int task_rows);

  /// Throws DimensionError or std::invalid_argument.
  void validate(int n, int task_rows) const;
};

/// Stacked finite differences over q_i .. q_{i+n_p}. Block k of S_v q + v is
/// (q_k - q_{k-1}) / dt, block k of S_a q + a is (q_k - 2 q_{k-1} + q_{k-2}) / dt^2,
/// with the entries before the stack taken from the history.
struct StackedDiffOps {
  Mat S_v;
  Vec v;
  Mat S_a;
  Vec a;
};

StackedDiffOps build_diff_ops(int n, int n_p, double dt, const Vec& q_prev, const Vec& q_prev2);

struct JointLimits {
  Vec q_min;
  Vec q_max;
  Vec v_max;

  static JointLimits from_model(const RobotModel& model);
};

/// Stack index of the trajectory's final sample inside the window, or -1.
struct TerminalSpec {
  int index = -1;
  double widen = 1.0;  // scales eps_q and eps_v
};

/// QP over the stacked positions. Block 0 is pinned to rollout.q_hat[0];
/// velocity bounds of block 0 are widened to contain the velocity the
/// history already implies.
QpProblem build_kin_qp(const KinMpcConfig& cfg, const NominalRollout& rollout, const StackedDiffOps& diff,
                       const JointLimits& limits, const TerminalSpec& terminal = {});

struct KinMpcStep {
  Vec q_cmd;
  QpStatus status = QpStatus::Optimal;
  bool degraded = false;  // solver failed, previous command held
  int iterations = 0;
  Vec plan;  // optimal stack, empty when degraded
  NominalRollout nominal;
  TerminalSpec terminal;
};

/// Receding-horizon position controller. One instance per robot, not
/// thread safe.
class KinMpcController {
 public:
  KinMpcController(const RobotModel& model, KinMpcConfig cfg);

  /// Rest history at q0.
  void reset(const Vec& q0);

  /// Command for tick i of traj (targets traj.samples[i ..]).
  KinMpcStep step(const Vec& q_measured, const TaskTrajectory& traj, int i);

  int degraded_ticks() const { return degraded_ticks_; }
  const KinMpcConfig& config() const { return cfg_; }
  const QpProblem& last_problem() const { return problem_; }

 private:
  const RobotModel& model_;
  KinMpcConfig cfg_;
  JointLimits limits_;
  QpSolver solver_;
  QpProblem problem_;
  Vec hist1_;  // anchor one tick back
  Vec hist2_;  // anchor two ticks back
  Vec last_cmd_;
  std::vector<int> warm_;
  double widen_ = 1.0;
  int degraded_ticks_ = 0;
};

/// Truncated-SVD IK baseline: q_cmd = previous command + dt * IK velocity.
class IkController {
 public:
  IkController(const RobotModel& model, double dt, double svd_threshold);
  void reset(const Vec& q0);
  Vec step(const TaskTrajectory& traj, int i);

 private:
  const RobotModel& model_;
  double dt_;
  double rel_;
  Vec last_cmd_;
};

}  // namespace hmpc
