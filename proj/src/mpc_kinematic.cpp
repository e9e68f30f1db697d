#include <hmpc/mpc_kinematic.hpp>

#include <algorithm>
#include <stdexcept>

namespace hmpc {

namespace {

bool is_psd(const Mat& Q) {
  if (Q.rows() == 0) return true;
  const Mat S = 0.5 * (Q + Q.transpose());
  if ((S - Q).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff())) return false;
  const Eigen::SelfAdjointEigenSolver<Mat> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-12 * (1.0 + eig.eigenvalues().cwiseAbs().maxCoeff());
}

void check_weight(const Mat& Q, int dim, const char* what) {
  require_size(Q.rows(), dim, what);
  require_size(Q.cols(), dim, what);
  if (!is_psd(Q)) throw std::invalid_argument(std::string(what) + " must be symmetric positive semidefinite");
}

// Adds 2 S'QS for the banded difference operator with the given stencil
// (coefficient of q_k, q_{k-1}, ...), one block per stack index.
void add_difference_gram(Mat& H, const std::vector<double>& stencil, const Mat& Q, int blocks, int n) {
  for (int k = 0; k < blocks; ++k) {
    for (std::size_t a = 0; a < stencil.size(); ++a) {
      const int ra = k - static_cast<int>(a);
      if (ra < 0) continue;
      for (std::size_t b = 0; b < stencil.size(); ++b) {
        const int rb = k - static_cast<int>(b);
        if (rb < 0) continue;
        H.block(ra * n, rb * n, n, n) += (2.0 * stencil[a] * stencil[b]) * Q;
      }
    }
  }
}

// S'(Q w) for the same banded operator, Q applied block-wise.
Vec difference_transpose(const std::vector<double>& stencil, const Mat& Q, const Vec& w, int blocks, int n) {
  Vec out = Vec::Zero(blocks * n);
  for (int k = 0; k < blocks; ++k) {
    const Vec qw = Q * w.segment(k * n, n);
    for (std::size_t a = 0; a < stencil.size(); ++a) {
      const int r = k - static_cast<int>(a);
      if (r >= 0) out.segment(r * n, n) += stencil[a] * qw;
    }
  }
  return out;
}

}  // namespace

KinMpcConfig KinMpcConfig::defaults(int n, int task_rows) {
  KinMpcConfig c;
  c.Q_e = 2000.0 * Mat::Identity(task_rows, task_rows);
  c.Q_d = 0.01 * Mat::Identity(n, n);
  c.Q_a = Mat::Zero(n, n);
  c.eps_q = Vec::Constant(n, 1e-2);
  c.eps_v = Vec::Constant(n, 5e-2);
  return c;
}

void KinMpcConfig::validate(int n, int task_rows) const {
  if (n_p < 1) throw std::invalid_argument("n_p must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(svd_threshold > 0.0 && svd_threshold < 1.0)) throw std::invalid_argument("svd_threshold must lie in (0, 1)");
  check_weight(Q_e, task_rows, "Q_e");
  check_weight(Q_d, n, "Q_d");
  check_weight(Q_a, n, "Q_a");
  require_size(eps_q.size(), n, "eps_q");
  require_size(eps_v.size(), n, "eps_v");
  if ((eps_q.array() <= 0.0).any() || (eps_v.array() <= 0.0).any()) {
    throw std::invalid_argument("terminal boxes must be positive");
  }
  if (!(reanchor_tol > 0.0)) throw std::invalid_argument("reanchor_tol must be positive");
}

StackedDiffOps build_diff_ops(int n, int n_p, double dt, const Vec& q_prev, const Vec& q_prev2) {
  if (!(dt > 0.0)) throw std::invalid_argument("build_diff_ops: dt must be positive");
  require_size(q_prev.size(), n, "build_diff_ops q_prev");
  require_size(q_prev2.size(), n, "build_diff_ops q_prev2");
  const int d = (n_p + 1) * n;
  const Mat I = Mat::Identity(n, n);
  const double iv = 1.0 / dt;
  const double ia = iv * iv;
  StackedDiffOps ops;
  ops.S_v = Mat::Zero(d, d);
  ops.S_a = Mat::Zero(d, d);
  ops.v = Vec::Zero(d);
  ops.a = Vec::Zero(d);
  for (int k = 0; k <= n_p; ++k) {
    ops.S_v.block(k * n, k * n, n, n) = iv * I;
    ops.S_a.block(k * n, k * n, n, n) = ia * I;
    if (k >= 1) {
      ops.S_v.block(k * n, (k - 1) * n, n, n) = -iv * I;
      ops.S_a.block(k * n, (k - 1) * n, n, n) = -2.0 * ia * I;
    }
    if (k >= 2) ops.S_a.block(k * n, (k - 2) * n, n, n) = ia * I;
  }
  ops.v.head(n) = -iv * q_prev;
  ops.a.head(n) = ia * (q_prev2 - 2.0 * q_prev);
  if (n_p >= 1) ops.a.segment(n, n) = ia * q_prev;
  return ops;
}

JointLimits JointLimits::from_model(const RobotModel& model) {
  return {model.q_min(), model.q_max(), model.v_limit()};
}

QpProblem build_kin_qp(const KinMpcConfig& cfg, const NominalRollout& rollout, const StackedDiffOps& diff,
                       const JointLimits& limits, const TerminalSpec& terminal) {
  const int n_p = cfg.n_p;
  const int blocks = n_p + 1;
  if (rollout.horizon() != n_p) throw DimensionError("build_kin_qp: rollout horizon must equal n_p");
  const int n = static_cast<int>(rollout.q_hat.front().size());
  const int d = blocks * n;
  const int rows = static_cast<int>(cfg.Q_e.rows());
  require_size(diff.S_v.rows(), d, "build_kin_qp S_v");
  require_size(diff.S_a.rows(), d, "build_kin_qp S_a");
  require_size(limits.q_min.size(), n, "build_kin_qp q_min");
  require_size(limits.q_max.size(), n, "build_kin_qp q_max");
  require_size(limits.v_max.size(), n, "build_kin_qp v_max");
  if (terminal.index > n_p) throw DimensionError("build_kin_qp: terminal index outside the window");

  QpProblem p;
  p.H = Mat::Zero(d, d);
  p.g = Vec::Zero(d);
  p.reg_center.resize(d);
  for (int k = 0; k < blocks; ++k) p.reg_center.segment(k * n, n) = rollout.q_hat[k];

  // Linearized task error e_k - J_k (q_k - qhat_k), summed over the free blocks.
  for (int k = 1; k < blocks; ++k) {
    const Mat& J = rollout.J_hat[k];
    require_size(J.rows(), rows, "build_kin_qp J_hat rows");
    require_size(J.cols(), n, "build_kin_qp J_hat cols");
    const Mat W = J.transpose() * cfg.Q_e;
    p.H.block(k * n, k * n, n, n) += 2.0 * W * J;
    p.g.segment(k * n, n) -= 2.0 * W * (rollout.e_hat[k] + J * rollout.q_hat[k]);
  }

  const double iv = 1.0 / cfg.dt;
  const std::vector<double> sv{iv, -iv};
  const std::vector<double> sa{iv * iv, -2.0 * iv * iv, iv * iv};
  add_difference_gram(p.H, sv, cfg.Q_d, blocks, n);
  add_difference_gram(p.H, sa, cfg.Q_a, blocks, n);
  p.g += 2.0 * difference_transpose(sv, cfg.Q_d, diff.v, blocks, n);
  p.g += 2.0 * difference_transpose(sa, cfg.Q_a, diff.a, blocks, n);

  p.lb.resize(d);
  p.ub.resize(d);
  p.lb.head(n) = rollout.q_hat[0];
  p.ub.head(n) = rollout.q_hat[0];
  for (int k = 1; k < blocks; ++k) {
    p.lb.segment(k * n, n) = limits.q_min;
    p.ub.segment(k * n, n) = limits.q_max;
  }

  p.Ain = diff.S_v;
  p.lin.resize(d);
  p.uin.resize(d);
  for (int k = 0; k < blocks; ++k) {
    p.lin.segment(k * n, n) = -limits.v_max - diff.v.segment(k * n, n);
    p.uin.segment(k * n, n) = limits.v_max - diff.v.segment(k * n, n);
  }
  // Block 0 is fixed, so its velocity is whatever the history implies.
  const Vec v0 = iv * rollout.q_hat[0] + diff.v.head(n);
  for (int j = 0; j < n; ++j) {
    p.lin(j) = std::min(-limits.v_max(j), v0(j)) - diff.v(j);
    p.uin(j) = std::max(limits.v_max(j), v0(j)) - diff.v(j);
  }

  if (terminal.index >= 1) {
    const int k = terminal.index;
    const Vec eq = terminal.widen * cfg.eps_q;
    const Vec ev = terminal.widen * cfg.eps_v;
    const Vec& qh = rollout.q_hat[k];
    const Vec& vh = rollout.qd_hat[k];
    p.lb.segment(k * n, n) = p.lb.segment(k * n, n).cwiseMax(qh - eq);
    p.ub.segment(k * n, n) = p.ub.segment(k * n, n).cwiseMin(qh + eq);
    p.lin.segment(k * n, n) = p.lin.segment(k * n, n).cwiseMax(vh - ev - diff.v.segment(k * n, n));
    p.uin.segment(k * n, n) = p.uin.segment(k * n, n).cwiseMin(vh + ev - diff.v.segment(k * n, n));
  }
  return p;
}

KinMpcController::KinMpcController(const RobotModel& model, KinMpcConfig cfg)
    : model_(model), cfg_(std::move(cfg)), limits_(JointLimits::from_model(model)) {}

void KinMpcController::reset(const Vec& q0) {
  require_size(q0.size(), model_.dof(), "KinMpcController::reset q0");
  hist1_ = q0;
  hist2_ = q0;
  last_cmd_ = q0;
  warm_.clear();
  widen_ = 1.0;
  degraded_ticks_ = 0;
}

KinMpcStep KinMpcController::step(const Vec& q_measured, const TaskTrajectory& traj, int i) {
  const int n = model_.dof();
  require_size(q_measured.size(), n, "KinMpcController::step q");
  if (last_cmd_.size() != n) reset(q_measured);
  const std::vector<TaskSpec> tasks = sorted_tasks(traj.tasks);
  cfg_.validate(n, task_dim(tasks));
  if (i < 0 || i > traj.final_index()) throw std::out_of_range("KinMpcController::step tick outside trajectory");

  Vec anchor = q_measured;
  if (cfg_.anchor == AnchorMode::Command) {
    if ((last_cmd_ - q_measured).cwiseAbs().maxCoeff() <= cfg_.reanchor_tol) {
      anchor = last_cmd_;
    } else {
      hist1_ = q_measured;
      hist2_ = q_measured;
      warm_.clear();
    }
  }

  KinMpcStep out;
  out.nominal = ik_rollout(model_, anchor, traj.window(i, cfg_.n_p + 1), tasks, cfg_.dt, cfg_.svd_threshold);
  const StackedDiffOps diff = build_diff_ops(n, cfg_.n_p, cfg_.dt, hist1_, hist2_);
  const int final_offset = traj.final_index() - i;
  out.terminal.index = final_offset <= cfg_.n_p ? final_offset : -1;
  out.terminal.widen = widen_;
  problem_ = build_kin_qp(cfg_, out.nominal, diff, limits_, out.terminal);

  const QpSolution sol = solver_.solve(problem_, warm_);
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status == QpStatus::Optimal) {
    out.q_cmd = sol.z.segment(n, n);
    out.plan = sol.z;
    widen_ = 1.0;
    // Shift the active set one block towards the present for the next tick.
    const int d = problem_.dim();
    warm_.clear();
    for (int id : sol.active_set) {
      if (id < 2 * d) {
        const int var = id / 2 - n;
        if (var >= n) warm_.push_back(QpSolver::box_id(var, id % 2 == 1));
      } else {
        const int row = (id - 2 * d) / 2 - n;
        if (row >= n) warm_.push_back(QpSolver::ineq_id(d, row, id % 2 == 1));
      }
    }
  } else {
    out.q_cmd = last_cmd_;
    out.degraded = true;
    ++degraded_ticks_;
    widen_ *= 10.0;
    warm_.clear();
  }

  hist2_ = hist1_;
  hist1_ = anchor;
  last_cmd_ = out.q_cmd;
  return out;
}

IkController::IkController(const RobotModel& model, double dt, double svd_threshold)
    : model_(model), dt_(dt), rel_(svd_threshold) {
  if (!(dt > 0.0)) throw std::invalid_argument("IkController: dt must be positive");
}

void IkController::reset(const Vec& q0) {
  require_size(q0.size(), model_.dof(), "IkController::reset q0");
  last_cmd_ = q0;
}

Vec IkController::step(const TaskTrajectory& traj, int i) {
  if (last_cmd_.size() != model_.dof()) throw std::logic_error("IkController::step before reset");
  if (i < 0 || i > traj.final_index()) throw std::out_of_range("IkController::step tick outside trajectory");
  const std::vector<TaskSpec> tasks = sorted_tasks(traj.tasks);
  last_cmd_ = last_cmd_ + dt_ * prioritized_ik_step(model_, last_cmd_, tasks, traj.samples[i].pose, rel_);
  return last_cmd_;
}

}  // namespace hmpc
