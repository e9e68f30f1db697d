#include <hmpc/dynamics.hpp>

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace hmpc {
namespace {

using testing::desk_model;
using testing::pendulum;
using testing::Rng;

struct State {
  Vec q, qd, u;
};

State random_state(const RobotModel& m, Rng& rng) {
  return {rng.vec(m.dof(), -3.0, 3.0), rng.vec(m.dof(), -2.0, 2.0), rng.vec(m.dof(), -20.0, 20.0)};
}

RobotModel without_gravity(RobotModel m) {
  m.gravity.setZero();
  return m;
}

TEST(MassMatrix, PendulumIsMl2) {
  const Mat M = mass_matrix(pendulum(), Vec::Constant(1, 0.4));
  EXPECT_NEAR(M(0, 0), 1.0, 1e-8);  // m l^2 plus the negligible link inertia
}

TEST(MassMatrix, ColumnsMatchInverseDynamics) {
  Rng rng(11);
  const RobotModel& m = desk_model();
  for (int trial = 0; trial < 20; ++trial) {
    const Vec q = rng.vec(6, -3.0, 3.0);
    const Mat M = mass_matrix(m, q);
    const Vec zero = Vec::Zero(6);
    const Vec base = inverse_dynamics(m, q, zero, zero);
    for (int i = 0; i < 6; ++i) {
      const Vec col = inverse_dynamics(m, q, zero, Vec::Unit(6, i)) - base;
      EXPECT_LT((M.col(i) - col).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(MassMatrix, SymmetricPositiveDefinite) {
  Rng rng(12);
  for (const RobotModel* m : {&desk_model(), &testing::planar2(), &pendulum()}) {
    for (int trial = 0; trial < 50; ++trial) {
      const Mat M = mass_matrix(*m, rng.vec(m->dof(), -3.0, 3.0));
      EXPECT_LT((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(M).eigenvalues().minCoeff(), 0.0);
    }
  }
}

TEST(BiasForces, ZeroWithoutMotionOrGravity) {
  const RobotModel m = without_gravity(desk_model());
  Rng rng(13);
  EXPECT_EQ(bias_forces(m, rng.vec(6), Vec::Zero(6)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(inverse_dynamics(m, Vec::Zero(6), Vec::Zero(6), Vec::Zero(6)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BiasForces, PendulumHoldingTorque) {
  const double g = 9.81;
  EXPECT_NEAR(bias_forces(pendulum(), Vec::Zero(1), Vec::Zero(1))(0), g, 1e-12);
  for (double theta : {-1.0, 0.3, 1.2, 2.5}) {
    const Vec q = Vec::Constant(1, theta);
    EXPECT_NEAR(inverse_dynamics(pendulum(), q, Vec::Zero(1), Vec::Zero(1))(0), g * std::cos(theta), 1e-12);
  }
}

TEST(BiasForces, EqualsInverseDynamicsAtZeroAcceleration) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const State s = random_state(desk_model(), rng);
    EXPECT_LT((bias_forces(desk_model(), s.q, s.qd) - inverse_dynamics(desk_model(), s.q, s.qd, Vec::Zero(6)))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
  }
}

TEST(InverseDynamics, SplitsIntoMassTimesAccelerationPlusBias) {
  Rng rng(15);
  const RobotModel& m = desk_model();
  for (int trial = 0; trial < 50; ++trial) {
    const State s = random_state(m, rng);
    const Vec qdd = rng.vec(6, -5.0, 5.0);
    const Vec lhs = inverse_dynamics(m, s.q, s.qd, qdd) - inverse_dynamics(m, s.q, s.qd, Vec::Zero(6));
    EXPECT_LT((lhs - mass_matrix(m, s.q) * qdd).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ForwardDynamics, RoundTripsWithInverse) {
  Rng rng(16);
  const RobotModel& m = desk_model();
  for (int trial = 0; trial < 50; ++trial) {
    const State s = random_state(m, rng);
    const Vec qdd = forward_dynamics(m, s.q, s.qd, s.u);
    EXPECT_LT((inverse_dynamics(m, s.q, s.qd, qdd) - s.u).cwiseAbs().maxCoeff(), 1e-9);
    const Vec residual = mass_matrix(m, s.q) * qdd + bias_forces(m, s.q, s.qd) - s.u;
    EXPECT_LE(residual.norm(), 1e-10 * (1.0 + s.u.norm()));
  }
}

TEST(ForwardDynamics, EquilibriumTorqueGivesZeroAcceleration) {
  Rng rng(17);
  const State s = random_state(desk_model(), rng);
  const Vec b = bias_forces(desk_model(), s.q, s.qd);
  EXPECT_LT(forward_dynamics(desk_model(), s.q, s.qd, b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ForwardDynamics, PendulumFreeFall) {
  for (double theta : {0.0, 0.5, -1.0}) {
    const double qdd = forward_dynamics(pendulum(), Vec::Constant(1, theta), Vec::Zero(1), Vec::Zero(1))(0);
    EXPECT_NEAR(qdd, -9.81 * std::cos(theta), 1e-7);
  }
}

TEST(ForwardDynamics, BadInertiaThrows) {
  RobotModel m = pendulum();
  m.links[0].mass = 0.0;
  m.links[0].inertia.setZero();
  EXPECT_THROW(forward_dynamics(m, Vec::Zero(1), Vec::Zero(1), Vec::Zero(1)), NumericalError);
  EXPECT_THROW(forward_dynamics(pendulum(), Vec::Zero(2), Vec::Zero(1), Vec::Zero(1)), DimensionError);
}

TEST(Derivatives, PendulumGravityStiffness) {
  const double theta = 0.8;
  const DynamicsDerivatives d =
      dynamics_derivatives(pendulum(), Vec::Constant(1, theta), Vec::Zero(1), Vec::Zero(1));
  EXPECT_NEAR(d.dID_dq(0, 0), -9.81 * std::sin(theta), 1e-12);
  EXPECT_NEAR(d.dID_dqd(0, 0), 0.0, 1e-15);
}

double rel_err(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
}

TEST(Derivatives, ForwardBlocksMatchFiniteDifferences) {
  Rng rng(18);
  const RobotModel& m = desk_model();
  const double h = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    const State s = random_state(m, rng);
    const Vec qdd = forward_dynamics(m, s.q, s.qd, s.u);
    const DynamicsDerivatives d = dynamics_derivatives(m, s.q, s.qd, qdd);
    Mat dq(6, 6), dqd(6, 6), du(6, 6);
    for (int i = 0; i < 6; ++i) {
      const Vec e = h * Vec::Unit(6, i);
      dq.col(i) = (forward_dynamics(m, s.q + e, s.qd, s.u) - forward_dynamics(m, s.q - e, s.qd, s.u)) / (2 * h);
      dqd.col(i) = (forward_dynamics(m, s.q, s.qd + e, s.u) - forward_dynamics(m, s.q, s.qd - e, s.u)) / (2 * h);
      du.col(i) = (forward_dynamics(m, s.q, s.qd, s.u + e) - forward_dynamics(m, s.q, s.qd, s.u - e)) / (2 * h);
    }
    EXPECT_LT(rel_err(d.dFD_dq, dq), 1e-5);
    EXPECT_LT(rel_err(d.dFD_dqd, dqd), 1e-5);
    EXPECT_LT(rel_err(d.dFD_du, du), 1e-5);
  }
}

TEST(Derivatives, AnalyticMatchesFiniteDifferenceMethod) {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const State s = random_state(desk_model(), rng);
    const Vec qdd = rng.vec(6, -5.0, 5.0);
    const auto a = dynamics_derivatives(desk_model(), s.q, s.qd, qdd, DerivativeMethod::Analytic);
    const auto f = dynamics_derivatives(desk_model(), s.q, s.qd, qdd, DerivativeMethod::FiniteDifference);
    EXPECT_LT(rel_err(a.dID_dq, f.dID_dq), 1e-6);
    EXPECT_LT(rel_err(a.dID_dqd, f.dID_dqd), 1e-6);
  }
}

TEST(Derivatives, ForwardInverseIdentity) {
  Rng rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const State s = random_state(desk_model(), rng);
    const Vec qdd = forward_dynamics(desk_model(), s.q, s.qd, s.u);
    const DynamicsDerivatives d = dynamics_derivatives(desk_model(), s.q, s.qd, qdd);
    const Mat M = mass_matrix(desk_model(), s.q);
    EXPECT_LE((d.dFD_dq + d.Minv * d.dID_dq).norm(), 1e-10 * (1.0 + d.dID_dq.norm()));
    EXPECT_LE((d.dFD_dqd + d.Minv * d.dID_dqd).norm(), 1e-10 * (1.0 + d.dID_dqd.norm()));
    EXPECT_LT((d.dFD_du * M - Mat::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(d.dFD_du, d.Minv);
    EXPECT_EQ(d.Minv, d.Minv.transpose());
  }
}

TEST(Energy, FreeMotionDriftShrinksWithStep) {
  // Semi-implicit Euler, zero input and gravity: energy error should stay bounded and
  // shrink roughly linearly with the step.
  const RobotModel m = without_gravity(desk_model());
  Vec q0(6), qd0(6);
  q0 << 0.1, -0.4, 0.8, 0.2, -0.5, 0.3;
  qd0 << 0.5, -0.3, 0.4, 1.0, -0.8, 1.5;
  const double e0 = kinetic_energy(m, q0, qd0);
  auto drift = [&](double dt) {
    Vec q = q0, qd = qd0;
    double worst = 0.0;
    const int steps = static_cast<int>(std::lround(0.5 / dt));
    for (int k = 0; k < steps; ++k) {
      qd += dt * forward_dynamics(m, q, qd, Vec::Zero(6));
      q += dt * qd;
      worst = std::max(worst, std::abs(kinetic_energy(m, q, qd) - e0));
    }
    return worst / e0;
  };
  const double coarse = drift(1e-3);
  const double fine = drift(1e-4);
  EXPECT_LT(coarse, 0.05);
  EXPECT_LT(fine, 0.3 * coarse);
}

}  // namespace
}  // namespace hmpc
