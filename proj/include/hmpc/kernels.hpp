#pragma once

#include <hmpc/common.hpp>
#include <hmpc/nominal.hpp>
#include <hmpc/robot_model.hpp>

#include <vector>

namespace hmpc {

/// Serial reference or OpenMP loop. Both give bit-identical results.
enum class Exec { Serial, Parallel };

/// x_{k+1} = A x_k + B u_k + r, Euler step of the dynamics linearized at one
/// nominal point.
struct LinearizedStage {
  Mat A;  // 2n x 2n
  Mat B;  // 2n x n
  Vec r;  // 2n
};

/// Stacked prediction x = A_big x_i + B_big u + D_big r over blocks 0..n_p.
struct PredictionStack {
  int n_p = 0;
  int nx = 0;
  int nu = 0;
  Mat A_big;  // (n_p+1) nx x nx
  Mat B_big;  // (n_p+1) nx x n_p nu
  Mat D_big;  // (n_p+1) nx x n_p nx
  Vec r_big;  // n_p nx, stage remainders
  std::vector<Mat> phi;  // phi(j, s) at index j * (n_p + 1) + s, filled for j >= s

  const Mat& Phi(int j, int s) const { return phi[j * (n_p + 1) + s]; }

  /// A_big x_i + B_big u + D_big r_big.
  Vec propagate(const Vec& x_i, const Vec& u) const;
};

/// Linearization of xdot = f(x, u) at (x_hat, u_hat) after scaling time by
/// sigma, discretized with step dtau = dt / sigma, or dtau = dt when literal.
LinearizedStage linearize_stage(const RobotModel& model, const Vec& x_hat, const Vec& u_hat, double sigma,
                                double dt, bool literal = false);

/// One stage per nominal input, evaluated at (x_hat[k], u_hat[k]).
std::vector<LinearizedStage> linearize_horizon(const RobotModel& model, const NominalRollout& rollout,
                                               double sigma, double dt, bool literal = false,
                                               Exec exec = Exec::Serial);

/// Throws DimensionError on empty or inconsistent stages.
PredictionStack build_prediction(const std::vector<LinearizedStage>& stages, Exec exec = Exec::Serial);

}  // namespace hmpc
