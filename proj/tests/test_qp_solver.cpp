#include <hmpc/qp_solver.hpp>

#include <gtest/gtest.h>

#include <limits>

#include "qp_oracle.hpp"

namespace hmpc {
namespace {

using testing::Rng;

constexpr double kInf = std::numeric_limits<double>::infinity();

double kkt_bound(const QpProblem& p) { return 1e-8 * (1.0 + p.g.norm()); }

void expect_kkt(const QpProblem& p, const QpSolution& s) {
  EXPECT_LE(s.kkt.stationarity, kkt_bound(p));
  EXPECT_LE(s.kkt.primal_feasibility, kkt_bound(p));
  EXPECT_LE(s.kkt.complementarity, kkt_bound(p));
}

TEST(QpSolver, HalfspaceProjection) {
  QpProblem p;
  p.H = Mat::Identity(2, 2);
  p.g = Vec::Zero(2);
  p.Ain = Eigen::RowVector2d(1, 0);
  p.lin = Vec::Constant(1, 1.0);
  p.uin = Vec::Constant(1, kInf);
  QpSolver solver;
  const QpSolution s = solver.solve(p);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_LT((s.z - Eigen::Vector2d(1, 0)).norm(), 1e-8);
  EXPECT_GT(s.multipliers.ineq(0), 0.0);
  ASSERT_EQ(s.active_set.size(), 1u);
  EXPECT_EQ(s.active_set[0], QpSolver::ineq_id(2, 0, false));
}

TEST(QpSolver, UnconstrainedMatchesAnalyticOptimum) {
  Rng rng(21);
  QpSolver solver;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = rng.integer(1, 8);
    const Mat A = rng.mat(d, d);
    QpProblem p;
    p.H = A * A.transpose() + Mat::Identity(d, d);
    p.g = rng.vec(d);
    const QpSolution s = solver.solve(p);
    ASSERT_EQ(s.status, QpStatus::Optimal);
    const Vec expected = -p.H.ldlt().solve(p.g);
    EXPECT_LT((s.z - expected).norm(), 1e-10 * (1.0 + expected.norm()));
    EXPECT_LE(s.iterations, 2);
  }
}

TEST(QpSolver, MatchesExhaustiveActiveSetOracle) {
  Rng rng(22);
  QpSolver solver;
  for (int trial = 0; trial < 150; ++trial) {
    const int d = rng.integer(1, 6);
    const int mi = rng.integer(0, 8);
    const int me = rng.integer(0, 1) * rng.integer(0, std::min(2, d - 1));
    const QpProblem p = testing::random_qp(rng, d, mi, me);
    const auto expected = testing::brute_force_qp(p);
    ASSERT_TRUE(expected.has_value());
    const QpSolution s = solver.solve(p);
    ASSERT_EQ(s.status, QpStatus::Optimal) << "trial " << trial;
    EXPECT_LT((s.z - *expected).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
    expect_kkt(p, s);
  }
}

TEST(QpSolver, EqualBoxesAndRowsActAsEqualities) {
  QpProblem p;
  p.H = Mat::Identity(3, 3);
  p.g = Eigen::Vector3d(1, 1, 1);
  p.lb = Eigen::Vector3d(0.5, -kInf, -kInf);
  p.ub = Eigen::Vector3d(0.5, kInf, kInf);
  p.Ain = Eigen::RowVector3d(0, 1, 1);
  p.lin = Vec::Constant(1, 2.0);
  p.uin = Vec::Constant(1, 2.0);
  QpSolver solver;
  const QpSolution s = solver.solve(p);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_LT((s.z - Eigen::Vector3d(0.5, 1.0, 1.0)).norm(), 1e-8);
  EXPECT_TRUE(s.active_set.empty());
  expect_kkt(p, s);
}

TEST(QpSolver, DetectsInfeasibility) {
  QpProblem p;
  p.H = Mat::Identity(2, 2);
  p.g = Vec::Zero(2);
  p.Ain = (Mat(2, 2) << 1, 1, 1, 1).finished();
  p.lin = Eigen::Vector2d(1.0, -kInf);
  p.uin = Eigen::Vector2d(kInf, 0.0);
  QpSolver solver;
  EXPECT_EQ(solver.solve(p).status, QpStatus::Infeasible);

  QpProblem box;
  box.H = Mat::Identity(1, 1);
  box.g = Vec::Zero(1);
  box.Ain = Mat::Identity(1, 1);
  box.lin = Vec::Constant(1, 2.0);
  box.uin = Vec::Constant(1, kInf);
  box.lb = Vec::Constant(1, -1.0);
  box.ub = Vec::Constant(1, 1.0);
  EXPECT_EQ(solver.solve(box).status, QpStatus::Infeasible);
}

TEST(QpSolver, NonFiniteDataThrows) {
  QpProblem p;
  p.H = Mat::Identity(2, 2);
  p.g = Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 0.0);
  QpSolver solver;
  EXPECT_THROW(solver.solve(p), NumericalError);
}

TEST(QpSolver, IterationCapReturnsMaxIter) {
  Rng rng(23);
  QpSolver::Options opt;
  opt.cap_factor = 0;
  QpSolver solver(opt);
  QpProblem p = testing::random_qp(rng, 4, 6);
  p.g = Vec::Constant(4, 50.0);  // pushes the unconstrained optimum outside
  p.lb = Vec::Constant(4, -0.1);
  const QpSolution s = solver.solve(p);
  EXPECT_EQ(s.status, QpStatus::MaxIter);
  EXPECT_EQ(s.z.size(), 4);
}

TEST(KktCheck, PerturbationIsDetected) {
  Rng rng(24);
  QpSolver solver;
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const QpProblem p = testing::random_qp(rng, 5, 4);
    const QpSolution s = solver.solve(p);
    ASSERT_EQ(s.status, QpStatus::Optimal);
    for (int j = 0; j < 5; ++j) {
      if (s.multipliers.box(j) != 0.0) continue;
      Vec z = s.z;
      z(j) += 1e-3;
      EXPECT_GE(kkt_check(p, z, s.multipliers).stationarity, 1e-4);
      ++checked;
      break;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(KktCheck, FeasibilityResidualIsViolation) {
  QpProblem p;
  p.H = Mat::Identity(2, 2);
  p.g = Vec::Zero(2);
  p.lb = Eigen::Vector2d(0.0, -kInf);
  p.ub = Eigen::Vector2d(1.0, kInf);
  const double delta = 0.37;
  const KktResiduals r = kkt_check(p, Eigen::Vector2d(1.0 + delta, 0.0), QpMultipliers{});
  EXPECT_DOUBLE_EQ(r.primal_feasibility, delta);
}

TEST(QpSolver, WarmStartConvergesImmediately) {
  Rng rng(25);
  QpSolver solver;
  for (int trial = 0; trial < 100; ++trial) {
    const QpProblem p = testing::random_qp(rng, rng.integer(2, 6), rng.integer(1, 8), rng.integer(0, 1));
    const QpSolution cold = solver.solve(p);
    ASSERT_EQ(cold.status, QpStatus::Optimal);
    const QpSolution warm = solver.solve(p, cold.active_set);
    ASSERT_EQ(warm.status, QpStatus::Optimal);
    EXPECT_LE(warm.iterations, 2);
    EXPECT_LT((warm.z - cold.z).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(QpSolver, ScalingInvariance) {
  Rng rng(26);
  QpSolver solver;
  for (int trial = 0; trial < 100; ++trial) {
    QpProblem p = testing::random_qp(rng, rng.integer(1, 6), rng.integer(0, 8));
    const Vec z1 = solver.solve(p).z;
    const double alpha = rng.uniform(1e-3, 1e3);
    p.H *= alpha;
    p.g *= alpha;
    const QpSolution s = solver.solve(p);
    ASSERT_EQ(s.status, QpStatus::Optimal);
    EXPECT_LT((s.z - z1).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(QpSolver, DualObjectiveIsMonotone) {
  Rng rng(27);
  QpSolver::Options opt;
  opt.record_dual_trace = true;
  QpSolver solver(opt);
  for (int trial = 0; trial < 100; ++trial) {
    const QpProblem p = testing::random_qp(rng, rng.integer(1, 6), rng.integer(0, 8), rng.integer(0, 1));
    const QpSolution s = solver.solve(p);
    ASSERT_FALSE(s.dual_trace.empty());
    for (std::size_t k = 1; k < s.dual_trace.size(); ++k) {
      EXPECT_GE(s.dual_trace[k], s.dual_trace[k - 1] - 1e-9 * (1.0 + std::abs(s.dual_trace[k])));
    }
  }
}

TEST(QpSolver, Deterministic) {
  Rng rng(28);
  const QpProblem p = testing::random_qp(rng, 6, 8, 1);
  QpSolver a, b;
  const QpSolution sa = a.solve(p);
  const QpSolution sb = b.solve(p);
  EXPECT_EQ(sa.z, sb.z);
  EXPECT_EQ(sa.active_set, sb.active_set);
  EXPECT_EQ(a.solve(p).z, sa.z);
}

TEST(QpSolver, SemidefiniteHessianIsRegularized) {
  // Rank-deficient least squares; the fixed regularization makes it solvable.
  QpProblem p;
  const Eigen::RowVector3d j(1.0, 1.0, 0.0);
  p.H = j.transpose() * j;
  p.g = -j.transpose() * 2.0;
  p.reg_center = Eigen::Vector3d(0.3, 0.3, 0.7);
  QpSolver solver;
  const QpSolution s = solver.solve(p);
  ASSERT_EQ(s.status, QpStatus::Optimal);
  EXPECT_NEAR(j.dot(s.z), 2.0, 1e-6);
  EXPECT_NEAR(s.z(2), 0.7, 1e-6);
}

}  // namespace
}  // namespace hmpc
