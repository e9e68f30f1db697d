#pragma once

#include <hmpc/common.hpp>

#include <span>
#include <string_view>
#include <vector>

namespace hmpc {

/// minimize 0.5 z'Hz + g'z
/// s.t.     Aeq z = beq,  lb <= z <= ub,  lin <= Ain z <= uin.
///
/// Empty lb/ub mean unbounded; individual entries may be +-infinity. A box
/// entry with lb == ub is handled as an equality.
struct QpProblem {
  Mat H;
  Vec g;
  Mat Aeq;
  Vec beq;
  Vec lb;
  Vec ub;
  Mat Ain;
  Vec lin;
  Vec uin;
  /// Center of the solver's diagonal regularization. Empty means the origin.
  Vec reg_center;

  int dim() const { return static_cast<int>(g.size()); }
  int num_eq() const { return static_cast<int>(Aeq.rows()); }
  int num_ineq() const { return static_cast<int>(Ain.rows()); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

std::string_view to_string(QpStatus s);

struct KktResiduals {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double complementarity = 0.0;
};

/// Signed multipliers: for Ain rows and boxes a positive value means the
/// lower side is active, a negative one the upper side.
struct QpMultipliers {
  Vec eq;
  Vec ineq;
  Vec box;
};

struct QpSolution {
  Vec z;
  QpStatus status = QpStatus::Infeasible;
  KktResiduals kkt;
  QpMultipliers multipliers;
  /// One-sided inequality ids (see QpSolver::box_id / ineq_id).
  std::vector<int> active_set;
  int iterations = 0;
  double objective = 0.0;
  /// Dual objective after every step; filled when QpSolver::Options::record_dual_trace.
  std::vector<double> dual_trace;
};

/// Goldfarb-Idnani dual active-set method for strictly convex QPs.
///
/// Holds factorization workspaces; one instance must not be used from two
/// threads at once.
class QpSolver {
 public:
  struct Options {
    /// eps_reg = reg_scale * trace(H) / dim is added to the diagonal of H.
    double reg_scale = 1e-9;
    /// Iteration cap is cap_factor * (dim + number of inequality rows).
    int cap_factor = 10;
    /// Warm-started re-solves with the regularization centered on the
    /// previous solution. Zero gives the plain regularized solution.
    int refine_steps = 1;
    bool record_dual_trace = false;
  };

  QpSolver() = default;
  explicit QpSolver(Options options) : options_(options) {}

  QpSolution solve(const QpProblem& problem, std::span<const int> warm_start = {});

  const Options& options() const { return options_; }

  static int box_id(int var, bool upper) { return 2 * var + (upper ? 1 : 0); }
  static int ineq_id(int dim, int row, bool upper) { return 2 * dim + 2 * row + (upper ? 1 : 0); }

 private:
  enum class Kind { Box, Row, EqRow };

  struct Constraint {
    Kind kind;
    int index;     // variable (Box) or matrix row (Row, EqRow)
    double sign;   // normal = sign * e_index or sign * row
    double bound;  // normal'z >= bound, or == for equalities
    double tol;    // feasibility tolerance
    int id;        // one-sided id, -1 for equalities
  };

  struct ActiveEntry {
    bool equality;
    int index;  // into eqs_ or ineqs_
  };

  const Constraint& constraint(const ActiveEntry& a) const {
    return a.equality ? eqs_[a.index] : ineqs_[a.index];
  }
  QpSolution solve_impl(const QpProblem& p, std::span<const int> warm_start, const Vec* center);
  double normal_dot(const Constraint& c, const Vec& v) const;
  void step_direction(const Constraint& c);
  bool add_to_factorization();
  void remove_active(int position);
  void reset_factorization();
  bool add_forced(const ActiveEntry& entry);
  bool rebuild(const std::vector<int>& ineq_indices);
  QpSolution finish(const QpProblem& p, QpStatus status, int iterations);

  Options options_;
  int n_ = 0;
  Eigen::LLT<Mat> llt_;
  Mat J0_;
  Vec x0_;
  Mat J_;
  Mat R_;
  double r_norm_ = 1.0;
  Vec x_;
  Vec d_;
  Vec z_;
  Vec r_;
  Vec u_;
  int iq_ = 0;
  Mat ain_t_;
  Mat aeq_t_;
  std::vector<Constraint> eqs_;
  std::vector<Constraint> ineqs_;
  std::vector<ActiveEntry> active_;
  std::vector<char> is_active_;
  std::vector<double> dual_trace_;
};

/// Residuals of the KKT conditions of the (unregularized) problem.
KktResiduals kkt_check(const QpProblem& problem, const Vec& z, const QpMultipliers& multipliers);

}  // namespace hmpc
