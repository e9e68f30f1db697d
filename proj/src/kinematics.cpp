#include <hmpc/kinematics.hpp>

#include <hmpc/detail/chain.hpp>

#include <algorithm>
#include <cmath>

namespace hmpc {

namespace {

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)); }

Mat6X jacobian_from_frames(const RobotModel& model, const detail::ChainFrames<double>& f) {
  const int n = model.dof();
  Mat6X J(6, n);
  for (int k = 0; k < n; ++k) {
    const Vec3& z = f.axis[k];
    if (model.joints[k].kind == JointKind::Revolute) {
      J.col(k).head<3>() = z.cross(f.ee_pos - f.origin[k]);
      J.col(k).tail<3>() = z;
    } else {
      J.col(k).head<3>() = z;
      J.col(k).tail<3>().setZero();
    }
  }
  return J;
}

}  // namespace

Eigen::Quaterniond canonical(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond out = q.normalized();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Pose::Pose(const Eigen::Quaterniond& r, const Vec3& t) : rotation(canonical(r)), translation(t) {}

Pose::Pose(const Mat3& r, const Vec3& t) : rotation(canonical(Eigen::Quaterniond(r))), translation(t) {}

Vec3 rotation_log(const Mat3& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(c);
  const Vec3 v = vee(R);
  if (theta < 1e-8) return 0.5 * v;
  if (M_PI - theta < 1e-6) {
    // (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) a a^T
    const Mat3 aat = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
    Eigen::Index i = 0;
    aat.diagonal().maxCoeff(&i);
    Vec3 a = aat.col(i) / std::sqrt(std::max(aat(i, i), 1e-300));
    a.normalize();
    // Off the exact half turn the skew part still carries the sign.
    if (v.norm() > 1e-10 && v.dot(a) < 0.0) a = -a;
    return theta * a;
  }
  return theta / (2.0 * std::sin(theta)) * v;
}

Mat3 rotation_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Mat3 k;
    k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return Mat3::Identity() + k;
  }
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Pose forward_kinematics(const RobotModel& model, const Vec& q) {
  require_size(q.size(), model.dof(), "forward_kinematics q");
  detail::ChainFrames<double> f;
  detail::chain_frames<double>(model, q, f);
  return Pose(f.ee_rot, f.ee_pos);
}

Mat6X geometric_jacobian(const RobotModel& model, const Vec& q) {
  require_size(q.size(), model.dof(), "geometric_jacobian q");
  detail::ChainFrames<double> f;
  detail::chain_frames<double>(model, q, f);
  return jacobian_from_frames(model, f);
}

EeKinematics ee_kinematics(const RobotModel& model, const Vec& q) {
  require_size(q.size(), model.dof(), "ee_kinematics q");
  detail::ChainFrames<double> f;
  detail::chain_frames<double>(model, q, f);
  return {Pose(f.ee_rot, f.ee_pos), jacobian_from_frames(model, f)};
}

Mat6X jacobian_dot(const RobotModel& model, const Vec& q, const Vec& qd) {
  const int n = model.dof();
  require_size(q.size(), n, "jacobian_dot q");
  require_size(qd.size(), n, "jacobian_dot qd");
  detail::ChainFrames<double> f;
  detail::chain_frames<double>(model, q, f);
  const Mat6X J = jacobian_from_frames(model, f);
  const Vec3 v_ee = J.topRows<3>() * qd;

  // Outward pass: link angular velocity and velocity of each link origin.
  std::vector<Vec3> omega(n), v_origin(n);
  Vec3 w = Vec3::Zero();
  Vec3 v_prev = Vec3::Zero();
  Vec3 w_prev = Vec3::Zero();
  Vec3 p_prev = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    const Vec3& z = f.axis[k];
    Vec3 v = v_prev + w_prev.cross(f.origin[k] - p_prev);
    if (model.joints[k].kind == JointKind::Revolute) {
      w = w_prev + z * qd(k);
    } else {
      v += z * qd(k);
    }
    omega[k] = w;
    v_origin[k] = v;
    v_prev = v;
    w_prev = w;
    p_prev = f.origin[k];
  }

  Mat6X Jd(6, n);
  for (int k = 0; k < n; ++k) {
    const Vec3& z = f.axis[k];
    const Vec3 zd = omega[k].cross(z);
    if (model.joints[k].kind == JointKind::Revolute) {
      Jd.col(k).head<3>() = zd.cross(f.ee_pos - f.origin[k]) + z.cross(v_ee - v_origin[k]);
      Jd.col(k).tail<3>() = zd;
    } else {
      Jd.col(k).head<3>() = zd;
      Jd.col(k).tail<3>().setZero();
    }
  }
  return Jd;
}

TaskError task_error(const Pose& target, const Pose& current) {
  TaskError e;
  e.value.head<3>() = target.translation - current.translation;
  e.value.tail<3>() = rotation_log(target.rotation_matrix() * current.rotation_matrix().transpose());
  return e;
}

Pose apply_error(const Pose& current, const TaskError& err) {
  return Pose(Mat3(rotation_exp(err.value.tail<3>()) * current.rotation_matrix()),
              Vec3(current.translation + err.value.head<3>()));
}

}  // namespace hmpc
