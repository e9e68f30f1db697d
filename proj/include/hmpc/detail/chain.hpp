#pragma once

// Scalar-generic chain recursions shared by kinematics and dynamics. All
// quantities are expressed in the world frame.

#include <hmpc/robot_model.hpp>

#include <vector>

namespace hmpc::detail {

template <class S>
using V3 = Eigen::Matrix<S, 3, 1>;
template <class S>
using M3 = Eigen::Matrix<S, 3, 3>;
template <class S>
using VX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct ChainFrames {
  std::vector<M3<S>> rot;     // link k orientation
  std::vector<V3<S>> origin;  // link k frame origin (lies on joint k axis)
  std::vector<V3<S>> axis;    // joint k axis in world
  M3<S> ee_rot;
  V3<S> ee_pos;
};

template <class S>
M3<S> axis_rotation(const Vec3& axis, const S& angle) {
  using std::cos;
  using std::sin;
  const M3<S> k = (M3<S>() << S(0.0), S(-axis.z()), S(axis.y()), S(axis.z()), S(0.0),
                   S(-axis.x()), S(-axis.y()), S(axis.x()), S(0.0))
                      .finished();
  return M3<S>::Identity() + sin(angle) * k + (S(1.0) - cos(angle)) * (k * k);
}

template <class S>
void chain_frames(const RobotModel& model, const VX<S>& q, ChainFrames<S>& out) {
  const int n = model.dof();
  out.rot.resize(n);
  out.origin.resize(n);
  out.axis.resize(n);
  M3<S> rot = M3<S>::Identity();
  V3<S> pos = V3<S>::Zero();
  for (int k = 0; k < n; ++k) {
    const JointSpec& j = model.joints[k];
    const M3<S> r_origin = j.parent_transform.linear().cast<S>();
    const V3<S> t_origin = j.parent_transform.translation().cast<S>();
    pos = pos + rot * t_origin;
    rot = rot * r_origin;
    const V3<S> z = rot * j.axis.cast<S>();
    out.axis[k] = z;
    if (j.kind == JointKind::Revolute) {
      rot = rot * axis_rotation<S>(j.axis, q(k));
    } else {
      pos = pos + z * q(k);
    }
    out.rot[k] = rot;
    out.origin[k] = pos;
  }
  out.ee_rot = rot * model.ee_transform.linear().cast<S>();
  out.ee_pos = pos + rot * model.ee_transform.translation().cast<S>();
}

/// Recursive Newton-Euler inverse dynamics with gravity as a fictitious base
/// acceleration. Returns generalized forces.
template <class S>
VX<S> rnea(const RobotModel& model, const VX<S>& q, const VX<S>& qd, const VX<S>& qdd,
           const Vec3& gravity, ChainFrames<S>& frames) {
  const int n = model.dof();
  chain_frames<S>(model, q, frames);

  std::vector<V3<S>> w(n), wd(n), a_com(n), com(n);
  V3<S> w_prev = V3<S>::Zero();
  V3<S> wd_prev = V3<S>::Zero();
  V3<S> a_prev = (-gravity).cast<S>();
  V3<S> p_prev = V3<S>::Zero();

  for (int k = 0; k < n; ++k) {
    const V3<S>& z = frames.axis[k];
    const V3<S> r = frames.origin[k] - p_prev;
    V3<S> a = a_prev + wd_prev.cross(r) + w_prev.cross(w_prev.cross(r));
    if (model.joints[k].kind == JointKind::Revolute) {
      w[k] = w_prev + z * qd(k);
      wd[k] = wd_prev + z * qdd(k) + w_prev.cross(z) * qd(k);
    } else {
      w[k] = w_prev;
      wd[k] = wd_prev;
      a = a + S(2.0) * w_prev.cross(z) * qd(k) + z * qdd(k);
    }
    const V3<S> c = frames.rot[k] * model.links[k].com.cast<S>();
    com[k] = c;
    a_com[k] = a + wd[k].cross(c) + w[k].cross(w[k].cross(c));
    w_prev = w[k];
    wd_prev = wd[k];
    a_prev = a;
    p_prev = frames.origin[k];
  }

  VX<S> tau(n);
  V3<S> f_next = V3<S>::Zero();
  V3<S> n_next = V3<S>::Zero();
  for (int k = n - 1; k >= 0; --k) {
    const M3<S>& rot = frames.rot[k];
    const M3<S> inertia = rot * model.links[k].inertia.cast<S>() * rot.transpose();
    const V3<S> force = S(model.links[k].mass) * a_com[k];
    const V3<S> moment = inertia * wd[k] + w[k].cross(inertia * w[k]);
    V3<S> f = force + f_next;
    V3<S> m = moment + com[k].cross(force) + n_next;
    if (k + 1 < n) m = m + (frames.origin[k + 1] - frames.origin[k]).cross(f_next);
    tau(k) = model.joints[k].kind == JointKind::Revolute ? frames.axis[k].dot(m)
                                                          : frames.axis[k].dot(f);
    f_next = f;
    n_next = m;
  }
  return tau;
}

}  // namespace hmpc::detail
