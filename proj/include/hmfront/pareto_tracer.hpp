#pragma once

// Predictor-corrector continuation along the set of Pareto-critical points.
//
// The feasible set is {x : A x = b, lower <= x <= upper}. Equality rows and
// bounds that are active at a point are removed by working in the null space
// Z of those rows; the tangent computations use the reduced Jacobian J Z and
// the reduced weighted Hessian Z' W Z. Bound-active coordinates stay frozen
// while a point is expanded, and the corrector may release them again.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hmfront/nlp_solver.hpp"
#include "hmfront/problem.hpp"

namespace hmfront {

/// F : R^n -> R^m with derivatives, plus the feasible set.
struct MultiObjective {
  int objectives = 0;
  /// Fills the requested outputs; any pointer may be null.
  std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd* value, Eigen::MatrixXd* jacobian,
                     std::vector<Eigen::MatrixXd>* hessians)>
      eval;
  Eigen::MatrixXd eq_matrix;  // rows x n, may have zero rows
  Eigen::VectorXd eq_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dimension() const { return lower.size(); }
};

/// F in minimization form on the budget simplex (with the short bound).
/// The returned object refers to `problem`, which must outlive it.
MultiObjective portfolio_objectives(const PortfolioMop& problem);

struct KktPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd image;
  /// Convex weights with sum(alpha' J) orthogonal to the free directions.
  Eigen::VectorXd alpha;
  Eigen::MatrixXd jacobian;
  /// sum_i alpha_i Hessian_i.
  Eigen::MatrixXd weighted_hessian;
  /// Max-norm of the reduced stationarity Z' J' alpha.
  double kkt_residual = 0.0;
  /// Optimal value of the last corrector subproblem (>= -tol when critical).
  double criticality = 0.0;
  /// Indices of bound-active coordinates.
  std::vector<Eigen::Index> frozen;
};

/// Builds the point data at x. Without `alpha`, the weights minimizing the
/// reduced stationarity norm over the unit simplex are used.
KktPoint make_kkt_point(const MultiObjective& mo, const Eigen::VectorXd& x, const Eigen::VectorXd* alpha = nullptr);

struct TracerConfig {
  /// Target image distance between neighboring points.
  double tau = 0.0;
  int n_starts = 4;
  int max_points = 2000;
  double corrector_tol = 1e-9;
  int corrector_max_iter = 100;
  std::uint64_t seed = 0;
  int workers = 1;
  NlpOptions nlp;
};

struct TangentFrame {
  bool ok = false;
  std::string message;
  /// Orthonormal image-space directions orthogonal to alpha.
  std::vector<Eigen::VectorXd> directions;
  std::vector<Eigen::VectorXd> mu;
  /// Decision-space tangents with J nu = direction.
  std::vector<Eigen::VectorXd> nu;
};

/// QR of [alpha, J W^-1 J'] (reduced), with the directions taken from
/// columns 2..m of Q and the signs fixed by a nonnegative diagonal of R.
TangentFrame tangent_frame(const MultiObjective& mo, const KktPoint& point);

struct Prediction {
  Eigen::VectorXd x;
  /// Signed decision-space tangent and the path length travelled along it.
  Eigen::VectorXd velocity;
  double length = 0.0;
  int direction = 0;
  int sign = 1;
  /// Step t = tau / |J nu|.
  double step = 0.0;
  /// A bound was reached and the rest of the step followed its face.
  bool clipped = false;
};

/// x +- t nu for every frame direction. A step that reaches a bound continues
/// along nu projected onto that face. Directions with |J nu| < 1e-12 or no
/// feasible movement are skipped.
std::vector<Prediction> predictor(const MultiObjective& mo, const KktPoint& point, const TangentFrame& frame,
                                  double tau);

struct CorrectorResult {
  bool accepted = false;
  KktPoint point;
  int iterations = 0;
  std::string message;
};

/// Multiobjective Newton descent from `start`: each step solves
///
///   min t  s.t.  grad F_j' s + 1/2 s' H_j s <= t,  A s = b - A x,  bounds,
///
/// with H_j the Hessians made positive definite, followed by backtracking
/// until every objective decreases by a fraction of t. Stops when t >= -tol.
CorrectorResult corrector(const MultiObjective& mo, const Eigen::VectorXd& start, double tol, int max_iter = 100,
                          const NlpOptions& nlp = {});

struct TracedPoint {
  KktPoint point;
  /// Index of the point it was predicted from, -1 for corrected seeds.
  long parent = -1;
};

struct FrontApproximation {
  /// Sorted by the first objective.
  std::vector<TracedPoint> points;
  double tau = 0.0;
  int seeds_converged = 0;
  int predictions = 0;
  int clipped = 0;
  int rejected = 0;
  int duplicates = 0;
};

/// Corrects every seed, then expands points wave by wave in all tangent
/// directions. A corrected point farther than 2 tau from its parent is
/// predicted again with half the step, up to four times. Candidates closer
/// than tau/2 to an archived image are dropped.
/// Results do not depend on the worker count.
FrontApproximation trace(const MultiObjective& mo, const std::vector<Eigen::VectorXd>& seeds,
                         const TracerConfig& config);

/// Seeds are `n_starts` Dirichlet portfolios drawn from `seed`; tau = 0 means
/// default_tau(problem).
FrontApproximation trace(const PortfolioMop& problem, const TracerConfig& config);

/// 1% of the largest distance between anchor images.
double default_tau(const PortfolioMop& problem, const NlpOptions& nlp = {});

}  // namespace hmfront
