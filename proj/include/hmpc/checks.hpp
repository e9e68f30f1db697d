#pragma once

#include <hmpc/common.hpp>
#include <hmpc/qp_solver.hpp>
#include <hmpc/robot_model.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hmpc {

/// Minimizer of a small QP found by enumerating active subsets and keeping the
/// best feasible stationary point. Exponential in the constraint count.
std::optional<Vec> brute_force_qp(const QpProblem& p, double feas_tol = 1e-9);

/// Strictly convex QP (eigenvalues of H in [0.5, 2]) that is feasible by
/// construction around a random interior point.
QpProblem random_qp(std::mt19937_64& gen, int d, int mi, int me = 0);

struct CheckOptions {
  int derivative_samples = 1000;
  int qp_problems = 500;
  std::uint64_t seed = 1;
  double fd_tol = 1e-5;
  double identity_tol = 1e-10;
  double qp_tol = 1e-8;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  int samples = 0;
  double worst = 0.0;  // largest observed error, in the units of tolerance
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

/// Analytic forward-dynamics derivatives vs central differences on random states.
CheckResult check_derivatives(const RobotModel& model, const CheckOptions& opt);
/// dFD/dx = -M^-1 dID/dx and dFD/du = M^-1 on random states.
CheckResult check_identity(const RobotModel& model, const CheckOptions& opt);
/// Dual active-set solver vs brute_force_qp, plus KKT residuals.
CheckResult check_qp(const CheckOptions& opt);

/// derivatives, qp, identity
const std::vector<std::string>& check_suite_names();
/// Throws std::invalid_argument on an unknown suite name.
std::vector<CheckResult> run_checks(const RobotModel& model, const std::vector<std::string>& suites,
                                    const CheckOptions& opt);

/// One "PASS name ..." / "FAIL name ..." line.
std::string format_check(const CheckResult& r);

}  // namespace hmpc
