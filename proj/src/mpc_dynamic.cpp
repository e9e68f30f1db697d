#include <hmpc/mpc_dynamic.hpp>

#include <stdexcept>

namespace hmpc {

namespace {

void check_psd(const Mat& Q, int dim, const char* what) {
  require_size(Q.rows(), dim, what);
  require_size(Q.cols(), dim, what);
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(what) + " must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Mat> eig(Q, Eigen::EigenvaluesOnly);
  if (dim > 0 && eig.eigenvalues().minCoeff() < -1e-12 * (1.0 + eig.eigenvalues().cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(what) + " must be positive semidefinite");
  }
}

}  // namespace

DynMpcConfig DynMpcConfig::defaults(int n, int task_rows) {
  DynMpcConfig c;
  c.Q_e = 10.0 * Mat::Identity(task_rows, task_rows);
  c.Q_d = 1e-4 * Mat::Identity(n, n);
  c.Q_u = Mat::Zero(n, n);
  c.eps_x.resize(2 * n);
  c.eps_x << Vec::Constant(n, 1e-2), Vec::Constant(n, 5e-2);
  return c;
}

void DynMpcConfig::validate(int n, int task_rows) const {
  if (n_p < 1) throw std::invalid_argument("n_p must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be positive");
  if (!(svd_threshold > 0.0 && svd_threshold < 1.0)) throw std::invalid_argument("svd_threshold must lie in (0, 1)");
  check_psd(Q_e, task_rows, "Q_e");
  check_psd(Q_d, n, "Q_d");
  check_psd(Q_u, n, "Q_u");
  require_size(eps_x.size(), 2 * n, "eps_x");
  if ((eps_x.array() <= 0.0).any()) throw std::invalid_argument("terminal boxes must be positive");
}

DynLimits DynLimits::from_model(const RobotModel& model) {
  return {JointLimits::from_model(model), model.u_limit()};
}

QpProblem build_dyn_qp(const DynMpcConfig& cfg, const NominalRollout& rollout, const PredictionStack& stack,
                       const DynLimits& limits, const TerminalSpec& terminal) {
  const int n_p = cfg.n_p;
  const int n = stack.nu;
  const int nx = stack.nx;
  if (stack.n_p != n_p || rollout.horizon() != n_p || static_cast<int>(rollout.u_hat.size()) != n_p ||
      static_cast<int>(rollout.x_hat.size()) != n_p + 1) {
    throw DimensionError("build_dyn_qp: rollout and prediction horizons must equal n_p");
  }
  if (nx != 2 * n) throw DimensionError("build_dyn_qp: state must be [q; qd]");
  require_size(limits.u_max.size(), n, "build_dyn_qp u_max");
  require_size(limits.joints.q_min.size(), n, "build_dyn_qp q_min");
  if (terminal.index > n_p) throw DimensionError("build_dyn_qp: terminal index outside the window");
  const int xs = n_p * nx;
  const int d = xs + n_p * n;
  const int rows = static_cast<int>(cfg.Q_e.rows());

  QpProblem p;
  p.H = Mat::Zero(d, d);
  p.g = Vec::Zero(d);
  p.reg_center.resize(d);
  for (int k = 1; k <= n_p; ++k) {
    const int off = (k - 1) * nx;
    const Mat& J = rollout.J_hat[k];
    require_size(J.rows(), rows, "build_dyn_qp J_hat rows");
    const Mat W = J.transpose() * cfg.Q_e;
    p.H.block(off, off, n, n) += 2.0 * W * J;
    p.g.segment(off, n) -= 2.0 * W * (rollout.e_hat[k] + J * rollout.q_hat[k]);
    p.H.block(off + n, off + n, n, n) += 2.0 * cfg.Q_d;
    p.reg_center.segment(off, nx) = rollout.x_hat[k];
  }
  for (int k = 0; k < n_p; ++k) {
    const int off = xs + k * n;
    p.H.block(off, off, n, n) += 2.0 * cfg.Q_u;
    p.reg_center.segment(off, n) = rollout.u_hat[k];
  }

  // Blocks after x_i of A_big x_i + B_big u + D_big r.
  p.Aeq = Mat::Zero(xs, d);
  p.Aeq.leftCols(xs).setIdentity();
  p.Aeq.rightCols(n_p * n) = -stack.B_big.bottomRows(xs);
  p.beq = stack.A_big.bottomRows(xs) * rollout.x_hat[0] + stack.D_big.bottomRows(xs) * stack.r_big;

  p.lb.resize(d);
  p.ub.resize(d);
  for (int k = 0; k < n_p; ++k) {
    const int off = k * nx;
    p.lb.segment(off, n) = limits.joints.q_min;
    p.ub.segment(off, n) = limits.joints.q_max;
    p.lb.segment(off + n, n) = -limits.joints.v_max;
    p.ub.segment(off + n, n) = limits.joints.v_max;
    p.lb.segment(xs + k * n, n) = -limits.u_max;
    p.ub.segment(xs + k * n, n) = limits.u_max;
  }
  if (terminal.index >= 1) {
    const int off = (terminal.index - 1) * nx;
    const Vec e = terminal.widen * cfg.eps_x;
    const Vec& xh = rollout.x_hat[terminal.index];
    p.lb.segment(off, nx) = p.lb.segment(off, nx).cwiseMax(xh - e);
    p.ub.segment(off, nx) = p.ub.segment(off, nx).cwiseMin(xh + e);
  }
  return p;
}

DynMpcController::DynMpcController(const RobotModel& model, DynMpcConfig cfg)
    : model_(model), cfg_(std::move(cfg)), limits_(DynLimits::from_model(model)) {}

DynMpcStep DynMpcController::step(const Vec& x, const TaskTrajectory& traj, int i) {
  const int n = model_.dof();
  require_size(x.size(), 2 * n, "DynMpcController::step x");
  const std::vector<TaskSpec> tasks = sorted_tasks(traj.tasks);
  cfg_.validate(n, task_dim(tasks));
  if (i < 0 || i > traj.final_index()) throw std::out_of_range("DynMpcController::step tick outside trajectory");

  DynMpcStep out;
  out.nominal = osc_rollout(model_, x.head(n), x.tail(n), traj.window(i, cfg_.n_p + 1), tasks, cfg_.posture,
                            cfg_.dt, cfg_.svd_threshold);
  const std::vector<LinearizedStage> stages =
      linearize_horizon(model_, out.nominal, cfg_.window_sigma(), cfg_.dt, cfg_.literal_dtau, cfg_.exec);
  const PredictionStack stack = build_prediction(stages, cfg_.exec);
  const int final_offset = traj.final_index() - i;
  out.terminal.index = final_offset <= cfg_.n_p ? final_offset : -1;
  out.terminal.widen = widen_;
  problem_ = build_dyn_qp(cfg_, out.nominal, stack, limits_, out.terminal);

  const QpSolution sol = solver_.solve(problem_, warm_);
  out.status = sol.status;
  out.iterations = sol.iterations;
  const int xs = cfg_.n_p * 2 * n;
  if (sol.status == QpStatus::Optimal) {
    out.plan = sol.z;
    out.u_cmd = clamp_torque(model_, sol.z.segment(xs, n));
    widen_ = 1.0;
    // Shift bound activity one block towards the present.
    const int d = problem_.dim();
    warm_.clear();
    for (int id : sol.active_set) {
      if (id >= 2 * d) continue;
      const int var = id / 2;
      const int shifted = var < xs ? var - 2 * n : (var - n >= xs ? var - n : -1);
      if (shifted >= 0) warm_.push_back(QpSolver::box_id(shifted, id % 2 == 1));
    }
  } else {
    out.u_cmd = out.nominal.u_hat.front();  // already clamped by the rollout
    out.degraded = true;
    ++degraded_ticks_;
    widen_ *= 10.0;
    warm_.clear();
  }
  return out;
}

OscController::OscController(const RobotModel& model, std::optional<Posture> posture, double svd_threshold)
    : model_(model), posture_(std::move(posture)), rel_(svd_threshold) {}

Vec OscController::step(const Vec& x, const TaskTrajectory& traj, int i) const {
  const int n = model_.dof();
  require_size(x.size(), 2 * n, "OscController::step x");
  if (i < 0 || i > traj.final_index()) throw std::out_of_range("OscController::step tick outside trajectory");
  const std::vector<TaskSpec> tasks = sorted_tasks(traj.tasks);
  return clamp_torque(model_, osc_torque(model_, x.head(n), x.tail(n), tasks, traj.samples[i], posture_, rel_));
}

}  // namespace hmpc
