#pragma once

// Dense sequential quadratic programming for small smooth problems
//
//   minimize f(x)  s.t.  h_j(x) = 0,  g_i(x) >= 0,  lower <= x <= upper.
//
// Multiplier sign convention, used by every caller in the library:
//
//   L(x, mu, lambda, zl, zu) = f - sum_i mu_i g_i + sum_j lambda_j h_j
//                                - zl'(x - lower) + zu'(x - upper)
//
// so at a KKT point  grad f - J_g' mu + J_h' lambda - zl + zu = 0  with
// mu, zl, zu >= 0.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hmfront {

/// Value, and on request gradient and Hessian, of a smooth scalar function.
/// The Hessian pointer is only passed when has_hessian is set.
using Evaluator = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* gradient, Eigen::MatrixXd* hessian)>;

struct SmoothFunction {
  Evaluator eval;
  bool has_hessian = false;
};

struct NlpProblem {
  SmoothFunction objective;
  std::vector<SmoothFunction> equalities;
  std::vector<SmoothFunction> inequalities;
  Eigen::VectorXd lower;  // may contain -inf
  Eigen::VectorXd upper;  // may contain +inf
  Eigen::VectorXd x0;
};

struct NlpOptions {
  double tol_kkt = 1e-8;
  double tol_feas = 1e-9;
  int max_iter = 300;
  /// Lower bound on the eigenvalues of the QP model Hessian, relative to its scale.
  double hessian_floor = 1e-8;
  /// Ridge added to singular QP subproblems.
  double ridge = 1e-10;
};

enum class SolveStatus { converged, max_iter, infeasible };

std::string to_string(SolveStatus status);

/// Merit function values across one accepted step, under the same penalty.
struct MeritStep {
  double before = 0.0;
  double after = 0.0;
  double directional_derivative = 0.0;
  double step_length = 0.0;
};

struct ScalarSolution {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd lower_multipliers;
  Eigen::VectorXd upper_multipliers;
  SolveStatus status = SolveStatus::max_iter;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
  std::vector<MeritStep> merit_trace;

  bool converged() const { return status == SolveStatus::converged; }
};

/// KKT diagnostics of (x, multipliers) for a problem, independent of how they
/// were obtained.
struct KktReport {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
  double dual_infeasibility = 0.0;
};

KktReport kkt_report(const NlpProblem& problem, const ScalarSolution& solution);

ScalarSolution solve(const NlpProblem& problem, const NlpOptions& options = {});

struct MultiStartResult {
  ScalarSolution best;
  std::vector<ScalarSolution> locals;
};

/// Independent local solves from every start. The best converged solution
/// wins; ties on the objective are broken by lexicographic order of x.
/// Throws SolverError listing per-start statuses when none converges.
MultiStartResult solve_multistart(const NlpProblem& problem, const std::vector<Eigen::VectorXd>& starts,
                                  const NlpOptions& options = {}, int workers = 1);

/// Lexicographic "a < b" on vectors of equal length.
bool lexicographic_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace hmfront
