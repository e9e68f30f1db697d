#include <hmpc/nominal.hpp>

#include <hmpc/dynamics.hpp>

#include <algorithm>
#include <set>

namespace hmpc {

int task_dim(const std::vector<TaskSpec>& tasks) {
  int rows = 0;
  for (const TaskSpec& t : tasks) rows += task_rows(t.selector);
  return rows;
}

std::vector<TaskSpec> sorted_tasks(std::vector<TaskSpec> tasks) {
  std::set<int> seen;
  for (const TaskSpec& t : tasks) {
    if (t.priority < 1) throw ModelError("task priority must be >= 1");
    if (!seen.insert(t.priority).second) throw ModelError("task priorities must be distinct");
    if (!(t.k > 0.0)) throw ModelError("task gain k must be positive");
    const int rows = task_rows(t.selector);
    if (t.kp.size() != 0 && t.kp.size() != rows) throw DimensionError("task kp has wrong size");
    if (t.kd.size() != 0 && t.kd.size() != rows) throw DimensionError("task kd has wrong size");
    if ((t.kp.array() < 0.0).any() || (t.kd.array() < 0.0).any()) {
      throw ModelError("task gains must be non-negative");
    }
  }
  std::stable_sort(tasks.begin(), tasks.end(),
                   [](const TaskSpec& a, const TaskSpec& b) { return a.priority < b.priority; });
  return tasks;
}

std::vector<TaskSpec> default_hierarchy() {
  TaskSpec pos;
  pos.priority = 1;
  pos.selector = TaskSelector::Position;
  pos.kp = Vec3(100, 100, 100);
  pos.kd = Vec3(7, 13, 7);
  TaskSpec ori;
  ori.priority = 2;
  ori.selector = TaskSelector::Orientation;
  ori.kp = Vec3(20, 20, 20);
  ori.kd = Vec3(1.5, 1.5, 1.5);
  return {pos, ori};
}

Mat compact_svd_pinv(const Mat& J, double rel_threshold) {
  Mat out = Mat::Zero(J.cols(), J.rows());
  if (J.size() == 0) return out;
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return out;
  const double cut = rel_threshold * s(0);
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) < cut || s(i) <= 0.0) break;
    out.noalias() += svd.matrixV().col(i) * (1.0 / s(i)) * svd.matrixU().col(i).transpose();
  }
  return out;
}

namespace {

void check_threshold(double rel_threshold) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0)) {
    throw std::invalid_argument("rel_threshold must lie in (0, 1)");
  }
}

Mat task_jacobian(const Mat6X& J, const TaskSpec& t) {
  return J.middleRows(task_offset(t.selector), task_rows(t.selector));
}

Vec task_rows_of(const Vec6& v, const TaskSpec& t) {
  return v.segment(task_offset(t.selector), task_rows(t.selector));
}

Vec gain_or(const Vec& gain, int rows, double fallback) {
  return gain.size() == rows ? gain : Vec::Constant(rows, fallback);
}

}  // namespace

Vec prioritized_ik_step(const RobotModel& model, const Vec& q, const std::vector<TaskSpec>& tasks,
                        const Pose& target, double rel_threshold, std::vector<IkLevel>* levels) {
  const int n = model.dof();
  require_size(q.size(), n, "prioritized_ik_step q");
  check_threshold(rel_threshold);
  const EeKinematics ee = ee_kinematics(model, q);
  const Vec6 err = task_error(target, ee.pose).value;

  Vec qd = Vec::Zero(n);
  Mat N = Mat::Identity(n, n);
  if (levels) levels->clear();
  for (const TaskSpec& t : tasks) {
    const Mat J = task_jacobian(ee.jacobian, t);
    const Vec e = task_rows_of(err, t);
    const Mat Jp = J * N;
    const Mat P = compact_svd_pinv(Jp, rel_threshold);
    const Vec delta = P * (t.k * e - J * qd);
    qd += delta;
    N -= P * Jp;
    if (levels) levels->push_back({J, Jp, N, delta, e});
  }
  return qd;
}

TaskStack task_stack(const RobotModel& model, const Vec& q, const std::vector<TaskSpec>& tasks,
                     const Pose& target, double rel_threshold) {
  const int n = model.dof();
  require_size(q.size(), n, "task_stack q");
  const EeKinematics ee = ee_kinematics(model, q);
  const Vec6 err = task_error(target, ee.pose).value;
  TaskStack out;
  out.J.resize(task_dim(tasks), n);
  out.e.resize(task_dim(tasks));
  Mat N = Mat::Identity(n, n);
  int row = 0;
  for (const TaskSpec& t : tasks) {
    const int r = task_rows(t.selector);
    const Mat Jp = task_jacobian(ee.jacobian, t) * N;
    out.J.middleRows(row, r) = Jp;
    out.e.segment(row, r) = task_rows_of(err, t);
    N -= compact_svd_pinv(Jp, rel_threshold) * Jp;
    row += r;
  }
  return out;
}

NominalRollout ik_rollout(const RobotModel& model, const Vec& q0, const std::vector<TaskTarget>& window,
                          const std::vector<TaskSpec>& tasks, double dt, double rel_threshold) {
  require_size(q0.size(), model.dof(), "ik_rollout q0");
  if (window.empty()) throw std::invalid_argument("ik_rollout: empty trajectory window");
  NominalRollout r;
  const std::size_t len = window.size();
  r.q_hat.reserve(len);
  r.qd_hat.reserve(len);
  r.J_hat.reserve(len);
  r.e_hat.reserve(len);
  const int rows = task_dim(tasks);
  std::vector<IkLevel> levels;
  Vec q = q0;
  for (std::size_t k = 0; k < len; ++k) {
    const Vec qd = prioritized_ik_step(model, q, tasks, window[k].pose, rel_threshold, &levels);
    // The recursion already holds the projected stack.
    Mat J(rows, model.dof());
    Vec e(rows);
    int row = 0;
    for (const IkLevel& l : levels) {
      J.middleRows(row, l.J_projected.rows()) = l.J_projected;
      e.segment(row, l.error.size()) = l.error;
      row += static_cast<int>(l.error.size());
    }
    r.q_hat.push_back(q);
    r.qd_hat.push_back(qd);
    r.J_hat.push_back(std::move(J));
    r.e_hat.push_back(std::move(e));
    q = q + dt * qd;
  }
  return r;
}

Vec osc_torque(const RobotModel& model, const Vec& q, const Vec& qd, const std::vector<TaskSpec>& tasks,
               const TaskTarget& target, const std::optional<Posture>& posture, double rel_threshold) {
  const int n = model.dof();
  require_size(q.size(), n, "osc_torque q");
  require_size(qd.size(), n, "osc_torque qd");
  check_threshold(rel_threshold);

  const Mat M = mass_matrix(model, q);
  const Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("mass matrix is not positive definite");
  const Mat Minv = llt.solve(Mat::Identity(n, n));
  const Vec b = bias_forces(model, q, qd);
  const EeKinematics ee = ee_kinematics(model, q);
  const Vec6 err = task_error(target.pose, ee.pose).value;
  const Vec6 twist = ee.jacobian * qd;
  const Vec6 jdot_qd = jacobian_dot(model, q, qd) * qd;

  Vec tau = Vec::Zero(n);
  Mat N = Mat::Identity(n, n);  // dynamically consistent null space, joint-velocity side
  Mat J_all(0, n);
  for (const TaskSpec& t : tasks) {
    const int rows = task_rows(t.selector);
    const Mat J = task_jacobian(ee.jacobian, t);
    const Vec a_des = task_rows_of(target.accel, t) +
                      gain_or(t.kd, rows, 0.0).cwiseProduct(task_rows_of(target.twist, t) - task_rows_of(twist, t)) +
                      gain_or(t.kp, rows, 0.0).cwiseProduct(task_rows_of(err, t));
    const Mat Jp = J * N;
    const Mat lambda = compact_svd_pinv(Jp * Minv * Jp.transpose(), rel_threshold);
    const Vec force = lambda * (a_des - task_rows_of(jdot_qd, t) - J * Minv * tau);
    tau += Jp.transpose() * force;
    N -= Minv * Jp.transpose() * lambda * Jp;

    J_all.conservativeResize(J_all.rows() + rows, n);
    J_all.bottomRows(rows) = J;
  }

  if (posture) {
    require_size(posture->q_des.size(), n, "posture q_des");
    require_size(posture->kp.size(), n, "posture kp");
    require_size(posture->kd.size(), n, "posture kd");
    const Vec tau_imp = posture->kp.cwiseProduct(posture->q_des - q) - posture->kd.cwiseProduct(qd);
    Mat N_all = Mat::Identity(n, n);
    if (J_all.rows() > 0) {
      const Mat lambda = compact_svd_pinv(J_all * Minv * J_all.transpose(), rel_threshold);
      N_all -= Minv * J_all.transpose() * lambda * J_all;
    }
    tau += N_all.transpose() * tau_imp;
  }
  return tau + b;
}

Vec clamp_torque(const RobotModel& model, const Vec& u) {
  const Vec lim = model.u_limit();
  return u.cwiseMax(-lim).cwiseMin(lim);
}

NominalRollout osc_rollout(const RobotModel& model, const Vec& q0, const Vec& qd0,
                           const std::vector<TaskTarget>& window, const std::vector<TaskSpec>& tasks,
                           const std::optional<Posture>& posture, double dt, double rel_threshold) {
  const int n = model.dof();
  require_size(q0.size(), n, "osc_rollout q0");
  require_size(qd0.size(), n, "osc_rollout qd0");
  if (window.empty()) throw std::invalid_argument("osc_rollout: empty trajectory window");
  NominalRollout r;
  const std::size_t len = window.size();
  Vec q = q0;
  Vec qd = qd0;
  for (std::size_t k = 0; k < len; ++k) {
    const TaskStack ts = task_stack(model, q, tasks, window[k].pose, rel_threshold);
    r.q_hat.push_back(q);
    r.qd_hat.push_back(qd);
    Vec x(2 * n);
    x << q, qd;
    r.x_hat.push_back(x);
    r.J_hat.push_back(ts.J);
    r.e_hat.push_back(ts.e);
    if (k + 1 == len) break;
    const Vec u = clamp_torque(model, osc_torque(model, q, qd, tasks, window[k], posture, rel_threshold));
    r.u_hat.push_back(u);
    qd = qd + dt * forward_dynamics(model, q, qd, u);
    q = q + dt * qd;
  }
  return r;
}

}  // namespace hmpc
