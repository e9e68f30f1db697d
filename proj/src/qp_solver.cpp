#include <hmpc/qp_solver.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace hmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool finite_or_inf(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i))) return false;
  }
  return true;
}

void validate_problem(const QpProblem& p) {
  const Eigen::Index n = p.g.size();
  require_size(p.H.rows(), n, "QpProblem H rows");
  require_size(p.H.cols(), n, "QpProblem H cols");
  if (p.Aeq.rows() > 0) require_size(p.Aeq.cols(), n, "QpProblem Aeq cols");
  require_size(p.beq.size(), p.Aeq.rows(), "QpProblem beq");
  if (p.lb.size() > 0) require_size(p.lb.size(), n, "QpProblem lb");
  if (p.ub.size() > 0) require_size(p.ub.size(), n, "QpProblem ub");
  if (p.Ain.rows() > 0) require_size(p.Ain.cols(), n, "QpProblem Ain cols");
  require_size(p.lin.size(), p.Ain.rows(), "QpProblem lin");
  require_size(p.uin.size(), p.Ain.rows(), "QpProblem uin");
  if (p.reg_center.size() > 0) require_size(p.reg_center.size(), n, "QpProblem reg_center");
  if (!p.H.allFinite() || !p.g.allFinite() || !p.Aeq.allFinite() || !p.beq.allFinite() ||
      !p.Ain.allFinite() || !p.reg_center.allFinite()) {
    throw NumericalError("QP data contains non-finite entries");
  }
  if (!finite_or_inf(p.lb) || !finite_or_inf(p.ub) || !finite_or_inf(p.lin) ||
      !finite_or_inf(p.uin)) {
    throw NumericalError("QP bounds contain NaN");
  }
}

}  // namespace

std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIter:
      return "max_iter";
  }
  return "unknown";
}

double QpSolver::normal_dot(const Constraint& c, const Vec& v) const {
  switch (c.kind) {
    case Kind::Box:
      return c.sign * v(c.index);
    case Kind::Row:
      return c.sign * ain_t_.col(c.index).dot(v);
    case Kind::EqRow:
      return c.sign * aeq_t_.col(c.index).dot(v);
  }
  return 0.0;
}

// d = J' n, z = J2 d2 (primal direction), r = R^-1 d1 (negative dual direction).
void QpSolver::step_direction(const Constraint& c) {
  switch (c.kind) {
    case Kind::Box:
      d_.noalias() = c.sign * J_.row(c.index).transpose();
      break;
    case Kind::Row:
      d_.noalias() = c.sign * (J_.transpose() * ain_t_.col(c.index));
      break;
    case Kind::EqRow:
      d_.noalias() = c.sign * (J_.transpose() * aeq_t_.col(c.index));
      break;
  }
  z_.noalias() = J_.rightCols(n_ - iq_) * d_.tail(n_ - iq_);
  if (iq_ > 0) {
    r_.head(iq_) =
        R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d_.head(iq_));
  }
}

bool QpSolver::add_to_factorization() {
  for (int j = n_ - 1; j >= iq_ + 1; --j) {
    const double a = d_(j - 1);
    const double b = d_(j);
    if (b == 0.0) continue;
    const double h = std::hypot(a, b);
    const double c = a / h;
    const double s = b / h;
    d_(j - 1) = h;
    d_(j) = 0.0;
    for (int k = 0; k < n_; ++k) {
      const double t1 = J_(k, j - 1);
      const double t2 = J_(k, j);
      J_(k, j - 1) = c * t1 + s * t2;
      J_(k, j) = -s * t1 + c * t2;
    }
  }
  R_.col(iq_).head(iq_ + 1) = d_.head(iq_ + 1);
  ++iq_;
  if (std::abs(d_(iq_ - 1)) <= std::numeric_limits<double>::epsilon() * r_norm_) {
    --iq_;
    R_.col(iq_).head(iq_ + 1).setZero();
    return false;
  }
  r_norm_ = std::max(r_norm_, std::abs(d_(iq_ - 1)));
  return true;
}

void QpSolver::remove_active(int position) {
  for (int k = position; k < iq_ - 1; ++k) {
    R_.col(k).head(iq_) = R_.col(k + 1).head(iq_);
    u_(k) = u_(k + 1);
  }
  R_.col(iq_ - 1).head(iq_).setZero();
  u_(iq_ - 1) = 0.0;
  if (!active_[position].equality) is_active_[active_[position].index] = 0;
  active_.erase(active_.begin() + position);
  --iq_;

  for (int j = position; j < iq_; ++j) {
    const double a = R_(j, j);
    const double b = R_(j + 1, j);
    if (b == 0.0) continue;
    const double h = std::hypot(a, b);
    const double c = a / h;
    const double s = b / h;
    R_(j, j) = h;
    R_(j + 1, j) = 0.0;
    for (int k = j + 1; k < iq_; ++k) {
      const double t1 = R_(j, k);
      const double t2 = R_(j + 1, k);
      R_(j, k) = c * t1 + s * t2;
      R_(j + 1, k) = -s * t1 + c * t2;
    }
    for (int k = 0; k < n_; ++k) {
      const double t1 = J_(k, j);
      const double t2 = J_(k, j + 1);
      J_(k, j) = c * t1 + s * t2;
      J_(k, j + 1) = -s * t1 + c * t2;
    }
  }
}

void QpSolver::reset_factorization() {
  J_ = J0_;
  R_.setZero(n_, n_);
  x_ = x0_;
  u_.setZero(n_ + 1);
  iq_ = 0;
  r_norm_ = 1.0;
  active_.clear();
  std::fill(is_active_.begin(), is_active_.end(), 0);
}

bool QpSolver::add_forced(const ActiveEntry& entry) {
  const Constraint& c = constraint(entry);
  step_direction(c);
  const double zn = normal_dot(c, z_);
  const double dn = d_.squaredNorm();
  if (!(zn > 1e-12 * dn)) return false;  // linearly dependent on the active set
  const double t = (c.bound - normal_dot(c, x_)) / zn;
  x_ += t * z_;
  if (iq_ > 0) u_.head(iq_) -= t * r_.head(iq_);
  if (!add_to_factorization()) {
    x_ -= t * z_;
    if (iq_ > 0) u_.head(iq_) += t * r_.head(iq_);
    return false;
  }
  u_(iq_ - 1) = t;
  active_.push_back(entry);
  if (!entry.equality) is_active_[entry.index] = 1;
  return true;
}

bool QpSolver::rebuild(const std::vector<int>& ineq_indices) {
  reset_factorization();
  for (int e = 0; e < static_cast<int>(eqs_.size()); ++e) {
    if (!add_forced({true, e})) {
      const Constraint& c = eqs_[e];
      if (std::abs(normal_dot(c, x_) - c.bound) > c.tol) return false;
    }
  }
  for (int i : ineq_indices) add_forced({false, i});
  return true;
}

QpSolution QpSolver::solve(const QpProblem& p, std::span<const int> warm_start) {
  validate_problem(p);
  const Vec* center = p.reg_center.size() == p.dim() ? &p.reg_center : nullptr;
  QpSolution sol = solve_impl(p, warm_start, center);
  // Proximal refinement: re-center the regularization on the current iterate,
  // which removes its bias along directions where H itself is definite.
  for (int k = 0; k < options_.refine_steps && sol.status == QpStatus::Optimal && p.dim() > 0; ++k) {
    const Vec z = sol.z;
    QpSolution next = solve_impl(p, sol.active_set, &z);
    if (next.status != QpStatus::Optimal) break;
    next.iterations += sol.iterations;
    next.dual_trace = std::move(sol.dual_trace);
    sol = std::move(next);
  }
  return sol;
}

QpSolution QpSolver::solve_impl(const QpProblem& p, std::span<const int> warm_start, const Vec* center) {
  n_ = p.dim();
  const int n = n_;
  const int m_in = p.num_ineq();
  dual_trace_.clear();

  if (n == 0) {
    x_.resize(0);
    eqs_.clear();
    ineqs_.clear();
    active_.clear();
    iq_ = 0;
    return finish(p, QpStatus::Optimal, 0);
  }

  Mat G = 0.5 * (p.H + p.H.transpose());
  const double eps_reg = options_.reg_scale * std::max(G.trace(), 0.0) / n;
  G.diagonal().array() += eps_reg;
  Vec g = p.g;
  if (center != nullptr) g -= eps_reg * *center;

  llt_.compute(G);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError("QP Hessian is not positive definite after regularization");
  }
  J0_ = llt_.matrixU().solve(Mat::Identity(n, n));
  x0_ = -llt_.solve(g);

  ain_t_ = p.Ain.transpose();
  aeq_t_ = p.Aeq.transpose();
  d_.resize(n);
  z_.resize(n);
  r_.resize(n + 1);

  // Constraint catalogue.
  eqs_.clear();
  ineqs_.clear();
  auto tol_for = [](double bound, double scale) { return 1e-12 * (1.0 + std::abs(bound) + scale); };
  for (int i = 0; i < p.num_eq(); ++i) {
    eqs_.push_back({Kind::EqRow, i, 1.0, p.beq(i), tol_for(p.beq(i), p.Aeq.row(i).lpNorm<1>()), -1});
  }
  std::vector<int> id_to_ineq(2 * n + 2 * m_in, -1);
  const bool has_lb = p.lb.size() == n;
  const bool has_ub = p.ub.size() == n;
  for (int j = 0; j < n; ++j) {
    const double lo = has_lb ? p.lb(j) : -kInf;
    const double hi = has_ub ? p.ub(j) : kInf;
    if (lo == hi) {
      eqs_.push_back({Kind::Box, j, 1.0, lo, tol_for(lo, 1.0), -1});
      continue;
    }
    if (lo > -kInf) {
      id_to_ineq[box_id(j, false)] = static_cast<int>(ineqs_.size());
      ineqs_.push_back({Kind::Box, j, 1.0, lo, tol_for(lo, 1.0), box_id(j, false)});
    }
    if (hi < kInf) {
      id_to_ineq[box_id(j, true)] = static_cast<int>(ineqs_.size());
      ineqs_.push_back({Kind::Box, j, -1.0, -hi, tol_for(hi, 1.0), box_id(j, true)});
    }
  }
  for (int i = 0; i < m_in; ++i) {
    const double lo = p.lin(i);
    const double hi = p.uin(i);
    const double scale = p.Ain.row(i).lpNorm<1>();
    if (lo == hi) {
      eqs_.push_back({Kind::Row, i, 1.0, lo, tol_for(lo, scale), -1});
      continue;
    }
    if (lo > -kInf) {
      id_to_ineq[ineq_id(n, i, false)] = static_cast<int>(ineqs_.size());
      ineqs_.push_back({Kind::Row, i, 1.0, lo, tol_for(lo, scale), ineq_id(n, i, false)});
    }
    if (hi < kInf) {
      id_to_ineq[ineq_id(n, i, true)] = static_cast<int>(ineqs_.size());
      ineqs_.push_back({Kind::Row, i, -1.0, -hi, tol_for(hi, scale), ineq_id(n, i, true)});
    }
  }
  const int m = static_cast<int>(ineqs_.size());
  is_active_.assign(m, 0);
  std::vector<char> excluded(m, 0);
  std::vector<char> preferred(m, 0);

  // Equalities first; warm-start constraints are then forced active and
  // pruned until every inequality multiplier is non-negative.
  std::vector<int> warm;
  for (int id : warm_start) {
    if (id >= 0 && id < static_cast<int>(id_to_ineq.size()) && id_to_ineq[id] >= 0) {
      warm.push_back(id_to_ineq[id]);
      preferred[id_to_ineq[id]] = 1;
    }
  }
  if (!rebuild(warm)) return finish(p, QpStatus::Infeasible, 0);
  while (!warm.empty()) {
    int worst = -1;
    double worst_u = 0.0;
    for (int k = 0; k < iq_; ++k) {
      if (!active_[k].equality && u_(k) < worst_u) {
        worst_u = u_(k);
        worst = active_[k].index;
      }
    }
    if (worst < 0) break;
    warm.erase(std::find(warm.begin(), warm.end(), worst));
    rebuild(warm);
  }

  double f_value = 0.5 * x_.dot(G * x_) + g.dot(x_);
  if (options_.record_dual_trace) dual_trace_.push_back(f_value);

  const int cap = options_.cap_factor * (n + m);
  int steps = 0;
  int iterations = 0;
  Vec s(m);

  while (true) {
    ++iterations;
    if (steps > cap) return finish(p, QpStatus::MaxIter, iterations);

    // Step 1: pick a violated constraint, warm-start candidates first.
    int ip = -1;
    double worst = 0.0;
    bool worst_preferred = false;
    for (int i = 0; i < m; ++i) {
      if (is_active_[i] || excluded[i]) continue;
      const Constraint& c = ineqs_[i];
      s(i) = normal_dot(c, x_) - c.bound;
      if (s(i) >= -c.tol) continue;
      const bool pref = preferred[i] != 0;
      if (ip < 0 || (pref && !worst_preferred) || (pref == worst_preferred && s(i) < worst)) {
        ip = i;
        worst = s(i);
        worst_preferred = pref;
      }
    }
    if (ip < 0) return finish(p, QpStatus::Optimal, iterations);

    std::vector<int> snapshot;
    for (const ActiveEntry& a : active_) {
      if (!a.equality) snapshot.push_back(a.index);
    }
    const Constraint& cp = ineqs_[ip];
    double u_new = 0.0;

    while (true) {
      if (++steps > cap) return finish(p, QpStatus::MaxIter, iterations);
      step_direction(cp);

      // Step 2b: partial (dual) step length t1 and full (primal) step length t2.
      int drop = -1;
      double t1 = kInf;
      for (int k = 0; k < iq_; ++k) {
        if (active_[k].equality) continue;
        if (r_(k) > 0.0) {
          const double ratio = u_(k) / r_(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      const double zn = normal_dot(cp, z_);
      const double slack = normal_dot(cp, x_) - cp.bound;
      const double t2 = zn > 1e-12 * d_.squaredNorm() ? -slack / zn : kInf;
      const double t = std::min(t1, t2);

      if (t >= kInf) return finish(p, QpStatus::Infeasible, iterations);

      if (t2 >= kInf) {
        // Dual step only.
        if (iq_ > 0) u_.head(iq_) -= t * r_.head(iq_);
        u_new += t;
        remove_active(drop);
        continue;
      }

      x_ += t * z_;
      f_value += t * zn * (0.5 * t + u_new);
      if (iq_ > 0) u_.head(iq_) -= t * r_.head(iq_);
      u_new += t;
      if (options_.record_dual_trace) dual_trace_.push_back(f_value);
#ifndef NDEBUG
      if (dual_trace_.size() >= 2) {
        assert(dual_trace_.back() >= dual_trace_[dual_trace_.size() - 2] -
                                         1e-9 * (1.0 + std::abs(dual_trace_.back())));
      }
#endif

      if (t == t2) {
        if (!add_to_factorization()) {
          excluded[ip] = 1;
          rebuild(snapshot);
          f_value = 0.5 * x_.dot(G * x_) + g.dot(x_);
          break;
        }
        u_(iq_ - 1) = u_new;
        active_.push_back({false, ip});
        is_active_[ip] = 1;
        break;
      }
      remove_active(drop);
    }
  }
}

QpSolution QpSolver::finish(const QpProblem& p, QpStatus status, int iterations) {
  const int n = p.dim();
  QpSolution sol;
  sol.z = x_;
  sol.status = status;
  sol.iterations = iterations;
  sol.multipliers.eq = Vec::Zero(p.num_eq());
  sol.multipliers.ineq = Vec::Zero(p.num_ineq());
  sol.multipliers.box = Vec::Zero(n);
  for (int k = 0; k < iq_; ++k) {
    const Constraint& c = constraint(active_[k]);
    const double mult = c.sign * u_(k);
    switch (c.kind) {
      case Kind::Box:
        sol.multipliers.box(c.index) += mult;
        break;
      case Kind::Row:
        sol.multipliers.ineq(c.index) += mult;
        break;
      case Kind::EqRow:
        sol.multipliers.eq(c.index) += mult;
        break;
    }
    if (!active_[k].equality) sol.active_set.push_back(c.id);
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.objective = n > 0 ? 0.5 * x_.dot(p.H * x_) + p.g.dot(x_) : 0.0;
  sol.kkt = kkt_check(p, sol.z, sol.multipliers);
  sol.dual_trace = dual_trace_;
  return sol;
}

KktResiduals kkt_check(const QpProblem& p, const Vec& z, const QpMultipliers& mult) {
  const int n = p.dim();
  require_size(z.size(), n, "kkt_check z");
  KktResiduals res;
  if (n == 0) return res;

  const Vec eq = mult.eq.size() == p.num_eq() ? mult.eq : Vec::Zero(p.num_eq());
  const Vec in = mult.ineq.size() == p.num_ineq() ? mult.ineq : Vec::Zero(p.num_ineq());
  const Vec bx = mult.box.size() == n ? mult.box : Vec::Zero(n);

  Vec grad = p.H * z + p.g - bx;
  if (p.num_eq() > 0) grad -= p.Aeq.transpose() * eq;
  if (p.num_ineq() > 0) grad -= p.Ain.transpose() * in;
  res.stationarity = grad.lpNorm<Eigen::Infinity>();

  double feas = 0.0;
  double comp = 0.0;
  if (p.num_eq() > 0) feas = (p.Aeq * z - p.beq).lpNorm<Eigen::Infinity>();

  auto two_sided = [&](double value, double lo, double hi, double lambda) {
    if (value < lo) feas = std::max(feas, lo - value);
    if (value > hi) feas = std::max(feas, value - hi);
    if (lambda > 0.0) {
      comp = std::max(comp, lo > -kInf ? lambda * std::abs(value - lo) : kInf);
    } else if (lambda < 0.0) {
      comp = std::max(comp, hi < kInf ? -lambda * std::abs(hi - value) : kInf);
    }
  };
  for (int j = 0; j < n; ++j) {
    const double lo = p.lb.size() == n ? p.lb(j) : -kInf;
    const double hi = p.ub.size() == n ? p.ub(j) : kInf;
    two_sided(z(j), lo, hi, bx(j));
  }
  if (p.num_ineq() > 0) {
    const Vec az = p.Ain * z;
    for (int i = 0; i < p.num_ineq(); ++i) two_sided(az(i), p.lin(i), p.uin(i), in(i));
  }
  res.primal_feasibility = feas;
  res.complementarity = comp;
  return res;
}

}  // namespace hmpc
