#pragma once

#include <hmpc/common.hpp>
#include <hmpc/kernels.hpp>
#include <hmpc/mpc_kinematic.hpp>
#include <hmpc/nominal.hpp>
#include <hmpc/qp_solver.hpp>
#include <hmpc/robot_model.hpp>
#include <hmpc/trajgen.hpp>

#include <optional>

namespace hmpc {

struct DynMpcConfig {
  int n_p = 10;
  double dt = 1e-3;
  /// Dilation, the window length in seconds. Zero means n_p * dt.
  double sigma = 0.0;
  /// Take dtau = dt instead of dt / sigma.
  bool literal_dtau = false;
  Mat Q_e;    // task rows x task rows
  Mat Q_d;    // n x n, joint velocity
  Mat Q_u;    // n x n, torque
  Vec eps_x;  // 2n terminal state box half-widths
  double svd_threshold = 1e-2;
  std::optional<Posture> posture;  // null-space impedance of the OSC nominal
  Exec exec = Exec::Serial;

  /// Q_e = 10 I, Q_d = 1e-4 I, Q_u = 0, eps_x = 1e-2 (positions) and 5e-2 (velocities).
  static DynMpcConfig defaults(int n, int task_rows);

  void validate(int n, int task_rows) const;
  double window_sigma() const { return sigma > 0.0 ? sigma : n_p * dt; }
};

/// Bounds for the state and input blocks.
struct DynLimits {
  JointLimits joints;
  Vec u_max;

  static DynLimits from_model(const RobotModel& model);
};

/// z = [x_{i+1} .. x_{i+n_p}; u_i .. u_{i+n_p-1}], dynamics as equalities
/// [I  -B] z = A x_i + D r on the blocks after x_i. terminal.index counts
/// state blocks from x_i = 0.
QpProblem build_dyn_qp(const DynMpcConfig& cfg, const NominalRollout& rollout, const PredictionStack& stack,
                       const DynLimits& limits, const TerminalSpec& terminal = {});

struct DynMpcStep {
  Vec u_cmd;
  QpStatus status = QpStatus::Optimal;
  bool degraded = false;  // solver failed, clamped OSC torque applied
  int iterations = 0;
  Vec plan;
  NominalRollout nominal;
  TerminalSpec terminal;
};

class DynMpcController {
 public:
  DynMpcController(const RobotModel& model, DynMpcConfig cfg);

  /// x = [q; qd]; targets traj.samples[i ..].
  DynMpcStep step(const Vec& x, const TaskTrajectory& traj, int i);

  int degraded_ticks() const { return degraded_ticks_; }
  const DynMpcConfig& config() const { return cfg_; }
  const QpProblem& last_problem() const { return problem_; }

 private:
  const RobotModel& model_;
  DynMpcConfig cfg_;
  DynLimits limits_;
  QpSolver solver_;
  QpProblem problem_;
  std::vector<int> warm_;
  double widen_ = 1.0;
  int degraded_ticks_ = 0;
};

/// Hierarchical OSC baseline with clamped output.
class OscController {
 public:
  OscController(const RobotModel& model, std::optional<Posture> posture, double svd_threshold);
  Vec step(const Vec& x, const TaskTrajectory& traj, int i) const;

 private:
  const RobotModel& model_;
  std::optional<Posture> posture_;
  double rel_;
};

}  // namespace hmpc
