#pragma once

#include <Eigen/Dense>

namespace hmfront::qp {

enum class QpStatus { optimal, infeasible, dependent_equalities, not_convex };

/// minimize 1/2 x'Hx + c'x  s.t.  A_eq x = b_eq,  A_in x >= b_in.
/// H must be symmetric positive definite.
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_rhs;
};

/// Multipliers satisfy H x + c = A_eq' eq_multipliers + A_in' ineq_multipliers
/// with ineq_multipliers >= 0 and zero on inactive rows.
struct QpResult {
  QpStatus status = QpStatus::infeasible;
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  double value = 0.0;
};

/// Goldfarb-Idnani dual active-set method. No feasible starting point is
/// needed; infeasibility is detected when no dual step can restore a violated
/// constraint.
QpResult solve(const QpProblem& problem);

}  // namespace hmfront::qp
