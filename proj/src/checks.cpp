#include <hmpc/checks.hpp>

#include <hmpc/dynamics.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hmpc {

namespace {

struct OneSided {
  Vec a;  // a'z >= b
  double b;
  int group;  // sides of the same box or row are never active together
};

std::vector<OneSided> one_sided_constraints(const QpProblem& p) {
  const int d = p.dim();
  std::vector<OneSided> out;
  int group = 0;
  for (int j = 0; j < d; ++j, ++group) {
    if (p.lb.size() == d && std::isfinite(p.lb(j))) out.push_back({Vec::Unit(d, j), p.lb(j), group});
    if (p.ub.size() == d && std::isfinite(p.ub(j))) out.push_back({-Vec::Unit(d, j), -p.ub(j), group});
  }
  for (int i = 0; i < p.num_ineq(); ++i, ++group) {
    if (std::isfinite(p.lin(i))) out.push_back({p.Ain.row(i).transpose(), p.lin(i), group});
    if (std::isfinite(p.uin(i))) out.push_back({-p.Ain.row(i).transpose(), -p.uin(i), group});
  }
  return out;
}

double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

Vec uniform_vec(std::mt19937_64& gen, int n, double lo, double hi) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(gen, lo, hi);
  return v;
}

Mat uniform_mat(std::mt19937_64& gen, int r, int c, double lo, double hi) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = uniform(gen, lo, hi);
  return m;
}

double rel_err(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
}

template <class F>
CheckResult timed(const std::string& name, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

std::optional<Vec> brute_force_qp(const QpProblem& p, double feas_tol) {
  const int d = p.dim();
  const int me = p.num_eq();
  const std::vector<OneSided> cons = one_sided_constraints(p);
  const int m = static_cast<int>(cons.size());
  std::optional<Vec> best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> chosen;

  auto evaluate = [&]() {
    const int k = me + static_cast<int>(chosen.size());
    Mat K = Mat::Zero(d + k, d + k);
    Vec rhs(d + k);
    K.topLeftCorner(d, d) = p.H;
    rhs.head(d) = -p.g;
    for (int r = 0; r < me; ++r) {
      K.block(d + r, 0, 1, d) = p.Aeq.row(r);
      K.block(0, d + r, d, 1) = p.Aeq.row(r).transpose();
      rhs(d + r) = p.beq(r);
    }
    for (int c = 0; c < static_cast<int>(chosen.size()); ++c) {
      const OneSided& s = cons[chosen[c]];
      K.block(d + me + c, 0, 1, d) = s.a.transpose();
      K.block(0, d + me + c, d, 1) = s.a;
      rhs(d + me + c) = s.b;
    }
    const Eigen::FullPivLU<Mat> lu(K);
    if (!lu.isInvertible()) return;
    const Vec z = lu.solve(rhs).head(d);
    if (me > 0 && (p.Aeq * z - p.beq).cwiseAbs().maxCoeff() > feas_tol) return;
    for (const OneSided& s : cons) {
      if (s.a.dot(z) < s.b - feas_tol * (1.0 + std::abs(s.b))) return;
    }
    const double obj = 0.5 * z.dot(p.H * z) + p.g.dot(z);
    if (obj < best_obj) {
      best_obj = obj;
      best = z;
    }
  };

  auto recurse = [&](auto&& self, int start) -> void {
    evaluate();
    if (static_cast<int>(chosen.size()) + me >= d) return;
    for (int i = start; i < m; ++i) {
      bool clash = false;
      for (int c : chosen) clash = clash || cons[c].group == cons[i].group;
      if (clash) continue;
      chosen.push_back(i);
      self(self, i + 1);
      chosen.pop_back();
    }
  };
  recurse(recurse, 0);
  return best;
}

QpProblem random_qp(std::mt19937_64& gen, int d, int mi, int me) {
  QpProblem p;
  const Mat Q = Eigen::HouseholderQR<Mat>(uniform_mat(gen, d, d, -1.0, 1.0)).householderQ();
  p.H = Q * uniform_vec(gen, d, 0.5, 2.0).asDiagonal() * Q.transpose();
  p.H = 0.5 * (p.H + p.H.transpose());
  p.g = uniform_vec(gen, d, -3.0, 3.0);
  const Vec z0 = uniform_vec(gen, d, -0.5, 0.5);
  const double inf = std::numeric_limits<double>::infinity();

  p.lb = Vec::Constant(d, -inf);
  p.ub = Vec::Constant(d, inf);
  for (int j = 0; j < d; ++j) {
    if (uniform(gen, 0, 1) < 0.4) p.lb(j) = z0(j) - uniform(gen, 0.0, 0.5);
    if (uniform(gen, 0, 1) < 0.4) p.ub(j) = z0(j) + uniform(gen, 0.0, 0.5);
  }
  p.Ain = uniform_mat(gen, mi, d, -1.0, 1.0);
  p.lin = Vec::Constant(mi, -inf);
  p.uin = Vec::Constant(mi, inf);
  for (int i = 0; i < mi; ++i) {
    const double center = p.Ain.row(i).dot(z0);
    const double u = uniform(gen, 0, 1);
    if (u < 0.4) {
      p.lin(i) = center - uniform(gen, 0.0, 0.5);
    } else if (u < 0.8) {
      p.uin(i) = center + uniform(gen, 0.0, 0.5);
    } else {
      p.lin(i) = center - uniform(gen, 0.0, 0.5);
      p.uin(i) = center + uniform(gen, 0.0, 0.5);
    }
  }
  p.Aeq = uniform_mat(gen, me, d, -1.0, 1.0);
  p.beq = p.Aeq * z0;
  return p;
}

CheckResult check_derivatives(const RobotModel& model, const CheckOptions& opt) {
  return timed("derivatives", [&] {
    std::mt19937_64 gen(opt.seed);
    const int n = model.dof();
    const double h = 1e-6;
    CheckResult r;
    r.tolerance = opt.fd_tol;
    for (int s = 0; s < opt.derivative_samples; ++s) {
      const Vec q = uniform_vec(gen, n, -3.0, 3.0);
      const Vec qd = uniform_vec(gen, n, -2.0, 2.0);
      const Vec u = uniform_vec(gen, n, -20.0, 20.0);
      const DynamicsDerivatives d = dynamics_derivatives(model, q, qd, forward_dynamics(model, q, qd, u));
      Mat dq(n, n), dqd(n, n), du(n, n);
      for (int i = 0; i < n; ++i) {
        const Vec e = h * Vec::Unit(n, i);
        dq.col(i) = (forward_dynamics(model, q + e, qd, u) - forward_dynamics(model, q - e, qd, u)) / (2 * h);
        dqd.col(i) = (forward_dynamics(model, q, qd + e, u) - forward_dynamics(model, q, qd - e, u)) / (2 * h);
        du.col(i) = (forward_dynamics(model, q, qd, u + e) - forward_dynamics(model, q, qd, u - e)) / (2 * h);
      }
      r.worst = std::max({r.worst, rel_err(d.dFD_dq, dq), rel_err(d.dFD_dqd, dqd), rel_err(d.dFD_du, du)});
      ++r.samples;
    }
    r.passed = r.worst <= r.tolerance;
    r.detail = "max relative error vs central differences";
    return r;
  });
}

CheckResult check_identity(const RobotModel& model, const CheckOptions& opt) {
  return timed("identity", [&] {
    std::mt19937_64 gen(opt.seed + 1);
    const int n = model.dof();
    CheckResult r;
    r.tolerance = opt.identity_tol;
    for (int s = 0; s < opt.derivative_samples; ++s) {
      const Vec q = uniform_vec(gen, n, -3.0, 3.0);
      const Vec qd = uniform_vec(gen, n, -2.0, 2.0);
      const Vec u = uniform_vec(gen, n, -20.0, 20.0);
      const DynamicsDerivatives d = dynamics_derivatives(model, q, qd, forward_dynamics(model, q, qd, u));
      const Mat M = mass_matrix(model, q);
      const double eq = (d.dFD_dq + d.Minv * d.dID_dq).norm() / (1.0 + d.dID_dq.norm());
      const double eqd = (d.dFD_dqd + d.Minv * d.dID_dqd).norm() / (1.0 + d.dID_dqd.norm());
      const double eu = (d.dFD_du * M - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
      r.worst = std::max({r.worst, eq, eqd, eu});
      ++r.samples;
    }
    r.passed = r.worst <= r.tolerance;
    r.detail = "max residual of the forward/inverse derivative identity";
    return r;
  });
}

CheckResult check_qp(const CheckOptions& opt) {
  return timed("qp", [&] {
    std::mt19937_64 gen(opt.seed + 2);
    QpSolver solver;
    CheckResult r;
    r.tolerance = opt.qp_tol;
    int mismatches = 0;
    double worst_kkt = 0.0;
    for (int t = 0; t < opt.qp_problems; ++t) {
      const int d = std::uniform_int_distribution<int>(1, 6)(gen);
      const int mi = std::uniform_int_distribution<int>(0, 8)(gen);
      const int me = std::uniform_int_distribution<int>(0, 1)(gen) *
                     std::uniform_int_distribution<int>(0, std::min(2, d - 1))(gen);
      const QpProblem p = random_qp(gen, d, mi, me);
      const std::optional<Vec> expected = brute_force_qp(p);
      const QpSolution s = solver.solve(p);
      ++r.samples;
      if (!expected || s.status != QpStatus::Optimal) {
        ++mismatches;
        continue;
      }
      r.worst = std::max(r.worst, (s.z - *expected).cwiseAbs().maxCoeff());
      const double scale = 1.0 + p.g.norm();
      worst_kkt = std::max({worst_kkt, s.kkt.stationarity / scale, s.kkt.primal_feasibility / scale,
                            s.kkt.complementarity / scale});
    }
    r.passed = mismatches == 0 && r.worst <= r.tolerance && worst_kkt <= r.tolerance;
    std::ostringstream os;
    os << "max |z - oracle|; worst KKT residual / (1 + |g|) = " << worst_kkt << "; status mismatches = " << mismatches;
    r.detail = os.str();
    return r;
  });
}

const std::vector<std::string>& check_suite_names() {
  static const std::vector<std::string> names{"derivatives", "qp", "identity"};
  return names;
}

std::vector<CheckResult> run_checks(const RobotModel& model, const std::vector<std::string>& suites,
                                    const CheckOptions& opt) {
  for (const std::string& s : suites) {
    const auto& all = check_suite_names();
    if (std::find(all.begin(), all.end(), s) == all.end()) {
      throw std::invalid_argument("unknown check suite '" + s + "' (expected derivatives, qp or identity)");
    }
  }
  std::vector<CheckResult> out;
  for (const std::string& s : suites) {
    if (s == "derivatives") out.push_back(check_derivatives(model, opt));
    if (s == "qp") out.push_back(check_qp(opt));
    if (s == "identity") out.push_back(check_identity(model, opt));
  }
  return out;
}

std::string format_check(const CheckResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS " : "FAIL ") << r.name << ": worst " << r.worst << " (tol " << r.tolerance << ") over "
     << r.samples << " samples in " << r.seconds << " s; " << r.detail;
  return os.str();
}

}  // namespace hmpc
