#include <hmpc/kernels.hpp>

#include <hmpc/dynamics.hpp>

#include <exception>
#include <stdexcept>

namespace hmpc {

LinearizedStage linearize_stage(const RobotModel& model, const Vec& x_hat, const Vec& u_hat, double sigma,
                                double dt, bool literal) {
  const int n = model.dof();
  require_size(x_hat.size(), 2 * n, "linearize_stage x_hat");
  require_size(u_hat.size(), n, "linearize_stage u_hat");
  if (!(sigma > 0.0)) throw std::invalid_argument("linearize_stage: sigma must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("linearize_stage: dt must be positive");

  const Vec q = x_hat.head(n);
  const Vec qd = x_hat.tail(n);
  const Vec qdd = forward_dynamics(model, q, qd, u_hat);
  const DynamicsDerivatives d = dynamics_derivatives(model, q, qd, qdd);

  Mat fx = Mat::Zero(2 * n, 2 * n);
  fx.topRightCorner(n, n).setIdentity();
  fx.bottomLeftCorner(n, n) = d.dFD_dq;
  fx.bottomRightCorner(n, n) = d.dFD_dqd;
  Mat fu = Mat::Zero(2 * n, n);
  fu.bottomRows(n) = d.dFD_du;
  Vec f(2 * n);
  f << qd, qdd;

  // Normalized time: derivatives scale with sigma, the step with 1 / sigma.
  const Mat A_tau = sigma * fx;
  const Mat B_tau = sigma * fu;
  const Vec r_tau = sigma * f - A_tau * x_hat - B_tau * u_hat;
  const double dtau = literal ? dt : dt / sigma;

  LinearizedStage s;
  s.A = A_tau * dtau;
  s.A.diagonal().array() += 1.0;
  s.B = B_tau * dtau;
  s.r = r_tau * dtau;
  return s;
}

std::vector<LinearizedStage> linearize_horizon(const RobotModel& model, const NominalRollout& rollout,
                                               double sigma, double dt, bool literal, Exec exec) {
  const int stages = static_cast<int>(rollout.u_hat.size());
  if (static_cast<int>(rollout.x_hat.size()) < stages) {
    throw DimensionError("linearize_horizon: rollout has fewer states than inputs");
  }
  std::vector<LinearizedStage> out(stages);
  if (exec == Exec::Parallel) {
    // Exceptions must not leave the parallel region.
    std::vector<std::exception_ptr> errors(stages);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < stages; ++k) {
      try {
        out[k] = linearize_stage(model, rollout.x_hat[k], rollout.u_hat[k], sigma, dt, literal);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (int k = 0; k < stages; ++k) {
      out[k] = linearize_stage(model, rollout.x_hat[k], rollout.u_hat[k], sigma, dt, literal);
    }
  }
  return out;
}

namespace {

// Fills column s of the Phi table and the matching blocks of B_big and D_big;
// s = -1 fills A_big (Phi(j, 0)).
void prediction_column(const std::vector<LinearizedStage>& stages, PredictionStack& p, int s) {
  const int nx = p.nx;
  const int nu = p.nu;
  const int start = s + 1;
  Mat& first = p.phi[start * (p.n_p + 1) + start];
  first = Mat::Identity(nx, nx);
  for (int j = start + 1; j <= p.n_p; ++j) {
    p.phi[j * (p.n_p + 1) + start].noalias() = stages[j - 1].A * p.Phi(j - 1, start);
  }
  for (int j = start; j <= p.n_p; ++j) {
    const Mat& phi = p.Phi(j, start);
    if (s < 0) {
      p.A_big.middleRows(j * nx, nx) = phi;
    } else if (j > s) {
      p.B_big.block(j * nx, s * nu, nx, nu).noalias() = phi * stages[s].B;
      p.D_big.block(j * nx, s * nx, nx, nx) = phi;
    }
  }
}

}  // namespace

PredictionStack build_prediction(const std::vector<LinearizedStage>& stages, Exec exec) {
  if (stages.empty()) throw DimensionError("build_prediction: no stages");
  PredictionStack p;
  p.n_p = static_cast<int>(stages.size());
  p.nx = static_cast<int>(stages.front().A.rows());
  p.nu = static_cast<int>(stages.front().B.cols());
  for (const LinearizedStage& s : stages) {
    require_size(s.A.rows(), p.nx, "build_prediction A rows");
    require_size(s.A.cols(), p.nx, "build_prediction A cols");
    require_size(s.B.rows(), p.nx, "build_prediction B rows");
    require_size(s.B.cols(), p.nu, "build_prediction B cols");
    require_size(s.r.size(), p.nx, "build_prediction r");
  }
  const int rows = (p.n_p + 1) * p.nx;
  p.A_big = Mat::Zero(rows, p.nx);
  p.B_big = Mat::Zero(rows, p.n_p * p.nu);
  p.D_big = Mat::Zero(rows, p.n_p * p.nx);
  p.r_big.resize(p.n_p * p.nx);
  for (int k = 0; k < p.n_p; ++k) p.r_big.segment(k * p.nx, p.nx) = stages[k].r;
  p.phi.assign((p.n_p + 1) * (p.n_p + 1), Mat());

  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = -1; s < p.n_p; ++s) prediction_column(stages, p, s);
  } else {
    for (int s = -1; s < p.n_p; ++s) prediction_column(stages, p, s);
  }
  return p;
}

Vec PredictionStack::propagate(const Vec& x_i, const Vec& u) const {
  require_size(x_i.size(), nx, "PredictionStack::propagate x_i");
  require_size(u.size(), n_p * nu, "PredictionStack::propagate u");
  return A_big * x_i + B_big * u + D_big * r_big;
}

}  // namespace hmpc
