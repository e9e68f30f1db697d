#include <hmpc/dynamics.hpp>

#include <hmpc/detail/chain.hpp>
#include <hmpc/detail/dual.hpp>

namespace hmpc {

namespace {

void check_state(const RobotModel& model, const Vec& q, const Vec& qd, const char* fn) {
  require_size(q.size(), model.dof(), fn);
  require_size(qd.size(), model.dof(), fn);
}

Eigen::LLT<Mat> factor_mass(const Mat& M) {
  Eigen::LLT<Mat> llt(M);
  if (!M.allFinite() || llt.info() != Eigen::Success) {
    throw NumericalError("mass matrix is not positive definite; check link inertias");
  }
  return llt;
}

}  // namespace

Mat mass_matrix(const RobotModel& model, const Vec& q) {
  const int n = model.dof();
  require_size(q.size(), n, "mass_matrix q");
  detail::ChainFrames<double> f;
  detail::chain_frames<double>(model, q, f);

  Mat M(n, n);
  double m_c = 0.0;
  Vec3 c_c = Vec3::Zero();
  Mat3 I_c = Mat3::Zero();
  for (int j = n - 1; j >= 0; --j) {
    const LinkInertia& link = model.links[j];
    const Vec3 c_link = f.origin[j] + f.rot[j] * link.com;
    const Mat3 I_link = f.rot[j] * link.inertia * f.rot[j].transpose();
    const double m_new = m_c + link.mass;
    const Vec3 c_new = (m_c * c_c + link.mass * c_link) / m_new;
    const Vec3 d_old = c_c - c_new;
    const Vec3 d_link = c_link - c_new;
    I_c = I_c + m_c * (d_old.squaredNorm() * Mat3::Identity() - d_old * d_old.transpose()) +
          I_link + link.mass * (d_link.squaredNorm() * Mat3::Identity() - d_link * d_link.transpose());
    m_c = m_new;
    c_c = c_new;

    // Wrench (about the composite com) that accelerates bodies j..n-1 at unit qdd_j.
    const Vec3& zj = f.axis[j];
    Vec3 force;
    Vec3 moment;
    if (model.joints[j].kind == JointKind::Revolute) {
      force = m_c * zj.cross(c_c - f.origin[j]);
      moment = I_c * zj;
    } else {
      force = m_c * zj;
      moment.setZero();
    }
    for (int i = 0; i <= j; ++i) {
      const Vec3& zi = f.axis[i];
      const double mij = model.joints[i].kind == JointKind::Revolute
                             ? zi.dot(moment + (c_c - f.origin[i]).cross(force))
                             : zi.dot(force);
      M(i, j) = mij;
      M(j, i) = mij;
    }
  }
  return M;
}

Vec inverse_dynamics(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& qdd) {
  check_state(model, q, qd, "inverse_dynamics");
  require_size(qdd.size(), model.dof(), "inverse_dynamics qdd");
  detail::ChainFrames<double> f;
  return detail::rnea<double>(model, q, qd, qdd, model.gravity, f);
}

Vec bias_forces(const RobotModel& model, const Vec& q, const Vec& qd) {
  check_state(model, q, qd, "bias_forces");
  detail::ChainFrames<double> f;
  return detail::rnea<double>(model, q, qd, Vec::Zero(model.dof()), model.gravity, f);
}

Vec forward_dynamics(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& u) {
  check_state(model, q, qd, "forward_dynamics");
  require_size(u.size(), model.dof(), "forward_dynamics u");
  const Eigen::LLT<Mat> llt = factor_mass(mass_matrix(model, q));
  return llt.solve(u - bias_forces(model, q, qd));
}

DynamicsDerivatives dynamics_derivatives(const RobotModel& model, const Vec& q, const Vec& qd,
                                         const Vec& qdd, DerivativeMethod method) {
  const int n = model.dof();
  check_state(model, q, qd, "dynamics_derivatives");
  require_size(qdd.size(), n, "dynamics_derivatives qdd");

  DynamicsDerivatives d;
  d.dID_dq.resize(n, n);
  d.dID_dqd.resize(n, n);

  if (method == DerivativeMethod::Analytic) {
    using detail::Dual;
    using DVec = detail::VX<Dual>;
    DVec q_d = q.cast<Dual>();
    DVec qd_d = qd.cast<Dual>();
    const DVec qdd_d = qdd.cast<Dual>();
    detail::ChainFrames<Dual> frames;
    for (int i = 0; i < n; ++i) {
      q_d(i).d = 1.0;
      const DVec tau = detail::rnea<Dual>(model, q_d, qd_d, qdd_d, model.gravity, frames);
      q_d(i).d = 0.0;
      for (int r = 0; r < n; ++r) d.dID_dq(r, i) = tau(r).d;

      qd_d(i).d = 1.0;
      const DVec tau2 = detail::rnea<Dual>(model, q_d, qd_d, qdd_d, model.gravity, frames);
      qd_d(i).d = 0.0;
      for (int r = 0; r < n; ++r) d.dID_dqd(r, i) = tau2(r).d;
    }
  } else {
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Vec qp = q, qm = q;
      qp(i) += h;
      qm(i) -= h;
      d.dID_dq.col(i) =
          (inverse_dynamics(model, qp, qd, qdd) - inverse_dynamics(model, qm, qd, qdd)) / (2.0 * h);
      Vec vp = qd, vm = qd;
      vp(i) += h;
      vm(i) -= h;
      d.dID_dqd.col(i) =
          (inverse_dynamics(model, q, vp, qdd) - inverse_dynamics(model, q, vm, qdd)) / (2.0 * h);
    }
  }

  const Eigen::LLT<Mat> llt = factor_mass(mass_matrix(model, q));
  d.Minv = llt.solve(Mat::Identity(n, n));
  d.Minv = (0.5 * (d.Minv + d.Minv.transpose())).eval();
  d.dFD_dq = -d.Minv * d.dID_dq;
  d.dFD_dqd = -d.Minv * d.dID_dqd;
  d.dFD_du = d.Minv;
  return d;
}

double kinetic_energy(const RobotModel& model, const Vec& q, const Vec& qd) {
  check_state(model, q, qd, "kinetic_energy");
  return 0.5 * qd.dot(mass_matrix(model, q) * qd);
}

}  // namespace hmpc
