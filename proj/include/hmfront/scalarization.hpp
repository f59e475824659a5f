#pragma once

// Scalarizations of the portfolio problem. Every method works on the
// minimization form F of PortfolioMop and solves one NLP in the variables
// z = (w, aux), where aux is the method's scalar (delta, t or s).
//
// Constraint ordering in the returned ScalarSolution: method constraints
// first (one per objective), then the budget 1 - sum(w) = 0 as the last
// equality. The method constraint multipliers are also copied into
// ScalarizationResult::multipliers.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmfront/nlp_solver.hpp"
#include "hmfront/problem.hpp"

namespace hmfront {

/// Pascoletti-Serafini parameters for
///
///   min t  s.t.  a + t r - (F(w) + offset) >= 0   (or = 0 when modified).
///
/// The offset is zero except for parameters produced by map_sf_to_sp, where
/// it carries the reflection of maximized objectives.
struct SpParams {
  Eigen::VectorXd a;
  Eigen::VectorXd r;
  Eigen::VectorXd offset;
};

/// Anchor points of the individual minimizations.
struct Anchors {
  Eigen::MatrixXd weights;  // n x m, column i minimizes F_i
  Eigen::VectorXd ideal;    // f*
  Eigen::MatrixXd phi;      // column i is F(x^i) - f*
  Eigen::VectorXd nbar;     // unit normal of the anchor hyperplane, sum < 0
};

struct NbiParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd ideal;
  Eigen::MatrixXd phi;
  Eigen::VectorXd nbar;
};

/// Shortage-function parameters. The reference is either a portfolio or its
/// F-vector; g is the direction of simultaneous improvement in F.
struct SfParams {
  enum class Reference { weights, objectives };
  Reference kind = Reference::objectives;
  Eigen::VectorXd reference;
  Eigen::VectorXd g;

  static SfParams from_weights(Eigen::VectorXd weights, Eigen::VectorXd g) {
    return {Reference::weights, std::move(weights), std::move(g)};
  }
  static SfParams from_objectives(Eigen::VectorXd f, Eigen::VectorXd g) {
    return {Reference::objectives, std::move(f), std::move(g)};
  }
};

struct PgpParams {
  double alpha = 1.0;
  double beta = 1.0;
  /// Cached bound-problem optima z1* (mean) and z3* (skewness).
  std::optional<double> z1_star;
  std::optional<double> z3_star;
};

struct ScalarizationOptions {
  NlpOptions nlp;
  /// Extra starting portfolios, tried after the method's default start.
  std::vector<Eigen::VectorXd> starts;
  /// When false and `starts` is not empty, only `starts` are tried.
  bool default_start = true;
  int workers = 1;
};

struct ScalarizationResult {
  ScalarSolution solution;
  Eigen::VectorXd weights;
  double aux = 0.0;
  Eigen::VectorXd image;
  Eigen::VectorXd multipliers;
  double budget_multiplier = 0.0;
  std::string message;
  bool converged() const { return solution.converged(); }
};

/// Shortage function: max delta s.t. F(w) <= F(y) - delta g.
ScalarizationResult solve_sf(const PortfolioMop& problem, const SfParams& sf, const ScalarizationOptions& options = {});
/// Modified shortage function: the SF constraints as equalities.
ScalarizationResult solve_msf(const PortfolioMop& problem, const SfParams& sf,
                              const ScalarizationOptions& options = {});
/// Normal boundary intersection: max s s.t. phi beta + s nbar = F(w) - f*.
ScalarizationResult solve_nbi(const PortfolioMop& problem, const NbiParams& nbi,
                              const ScalarizationOptions& options = {});
ScalarizationResult solve_sp(const PortfolioMop& problem, const SpParams& sp, bool modified,
                             const ScalarizationOptions& options = {});
/// Epsilon-constraint problem: min F_k s.t. F_i <= eps_i for every i != k.
/// `eps` has one entry per objective; entry k is ignored. The multiplier
/// vector has length m with a zero at k.
ScalarizationResult solve_epsilon(const PortfolioMop& problem, const Eigen::VectorXd& eps, int k,
                                  const ScalarizationOptions& options = {});

/// Individual minimizations from equal weights plus `extra_starts` flat
/// Dirichlet starts, and the derived NBI geometry.
Anchors compute_anchors(const PortfolioMop& problem, const ScalarizationOptions& options = {}, int extra_starts = 3,
                        std::uint64_t seed = 0);
NbiParams nbi_params(const Anchors& anchors, Eigen::VectorXd beta);

SfParams map_nbi_to_msf(const NbiParams& nbi);
/// Reflects maximized objectives about `at` so that the resulting SP, solved
/// in natural sense for those coordinates, reproduces the SF with t = -delta.
SpParams map_sf_to_sp(const PortfolioMop& problem, const SfParams& sf, const ObjectiveVectord& at);
/// Modified-SP parameters a = f* + phi beta, r = -nbar with t = -s.
SpParams map_nbi_to_sp(const NbiParams& nbi);
/// a_i = eps_i for i != k, a_k = 0, r = e_k.
SpParams epsilon_as_sp(const Eigen::VectorXd& eps, int k);

/// Bound problems of the goal program: z1* = max mean and z3* = max skewness
/// subject to variance = 1 on the feasible set.
struct PgpBounds {
  double z1_star = 0.0;
  double z3_star = 0.0;
  Eigen::VectorXd z1_weights;
  Eigen::VectorXd z3_weights;
};

PgpBounds pgp_bounds(const PortfolioMop& problem, const ScalarizationOptions& options = {});
/// Min d1^alpha + d3^beta with d1 = z1* - mean, d3 = z3* - skewness,
/// variance = 1, d >= 0. Here aux holds the goal value and the solution
/// variables are (w, d1, d3).
ScalarizationResult solve_pgp(const PortfolioMop& problem, PgpParams params, const ScalarizationOptions& options = {});

/// Goal-program stationarity evaluated at an NBI solution, report only.
struct PgpKktReport {
  bool applicable = false;
  std::string reason;
  double d1 = 0.0;
  double d3 = 0.0;
  /// Goal-constraint multipliers read from the NBI equalities.
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  /// nbar . lambda, the numerator of the closed-form exponent expression.
  double nbar_dot_lambda = 0.0;
  std::optional<double> alpha;
  std::optional<double> beta;
  /// Norm of the decision-space stationarity of the goal program.
  double first_set_residual = 0.0;
  /// Max of the two shortfall-stationarity residuals at (alpha, beta).
  std::optional<double> second_set_residual;
  bool mu2_vanishes = false;
};

/// Requires a (mean, variance, skewness) problem in that order and an NBI
/// result solved with `nbi`.
PgpKktReport check_pgp_kkt(const PortfolioMop& problem, const NbiParams& nbi, const ScalarizationResult& nbi_solution,
                           const PgpBounds& bounds);

}  // namespace hmfront
