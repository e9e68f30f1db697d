#pragma once

#include <hmpc/common.hpp>
#include <hmpc/robot_model.hpp>

namespace hmpc {

/// Joint-space mass matrix M(q) by the composite-rigid-body algorithm.
Mat mass_matrix(const RobotModel& model, const Vec& q);

/// Coriolis, centrifugal and gravity forces b(q, qd).
Vec bias_forces(const RobotModel& model, const Vec& q, const Vec& qd);

/// ID(q, qd, qdd) = M(q) qdd + b(q, qd) by recursive Newton-Euler.
Vec inverse_dynamics(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& qdd);

/// FD(q, qd, u) = M(q)^-1 (u - b). Throws NumericalError when M is not SPD.
Vec forward_dynamics(const RobotModel& model, const Vec& q, const Vec& qd, const Vec& u);

/// Partial derivatives of inverse and forward dynamics at one state.
struct DynamicsDerivatives {
  Mat dID_dq;
  Mat dID_dqd;
  Mat Minv;
  Mat dFD_dq;
  Mat dFD_dqd;
  Mat dFD_du;
};

enum class DerivativeMethod {
  Analytic,          // tangent propagation through the Newton-Euler recursion
  FiniteDifference,  // central differences of inverse_dynamics, test oracle
};

/// qdd must be the acceleration consistent with the evaluation point, i.e.
/// FD(q, qd, u) for the nominal torque u.
DynamicsDerivatives dynamics_derivatives(const RobotModel& model, const Vec& q, const Vec& qd,
                                         const Vec& qdd,
                                         DerivativeMethod method = DerivativeMethod::Analytic);

/// Kinetic energy 0.5 qd^T M(q) qd.
double kinetic_energy(const RobotModel& model, const Vec& q, const Vec& qd);

}  // namespace hmpc
