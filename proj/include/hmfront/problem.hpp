#pragma once

// The multi-objective portfolio problem and its single-objective utility
// scalarizations.
//
// Objectives are handled internally in minimization form
//
//   F(w) = (-mean, variance, -skewness, kurtosis)
//
// restricted to the selected subset, in the order given. The feasible set is
// the budget equality 1 - sum(w) = 0 together with w_i >= -short_bound.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "hmfront/moments.hpp"
#include "hmfront/nlp_solver.hpp"

namespace hmfront {

enum class Objective { mean = 0, variance = 1, skewness = 2, kurtosis = 3 };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& name);

/// +1 for minimized statistics, -1 for maximized ones.
inline double sense_sign(Objective objective) {
  return objective == Objective::mean || objective == Objective::skewness ? -1.0 : 1.0;
}

/// Values, Jacobian and Hessians of F at one point.
struct MopDerivatives {
  Eigen::VectorXd value;
  Eigen::MatrixXd jacobian;  // m x n
  std::vector<Eigen::MatrixXd> hessians;
};

class PortfolioMop {
 public:
  explicit PortfolioMop(MomentSetd moments,
                        std::vector<Objective> objectives = {Objective::mean, Objective::variance,
                                                             Objective::skewness},
                        double short_bound = 0.0);

  const MomentSetd& moments() const { return moments_; }
  const std::vector<Objective>& objectives() const { return objectives_; }
  int objective_count() const { return static_cast<int>(objectives_.size()); }
  Index assets() const { return moments_.assets(); }
  double short_bound() const { return short_bound_; }

  /// Natural-sense statistics of w.
  ObjectiveVectord stats(const Eigen::VectorXd& w) const;
  /// F(w) in minimization form.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& w) const;
  /// Maps natural statistics to F.
  Eigen::VectorXd to_internal(const ObjectiveVectord& stats) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& w) const;
  MopDerivatives derivatives(const Eigen::VectorXd& w) const;

  /// F_i as a smooth function of the first n entries of a longer variable
  /// vector of length `dimension` (dimension 0 means n). The returned
  /// function refers to this problem, which must outlive it.
  SmoothFunction objective_function(int i, Index dimension = 0) const;

  Eigen::VectorXd lower_bounds() const;
  Eigen::VectorXd equal_weights() const;
  /// Budget constraint 1 - sum(w) = 0 on the first n of `dimension` variables.
  SmoothFunction budget(Index dimension = 0) const;
  /// Distance of w from the feasible set in the max norm.
  double infeasibility(const Eigen::VectorXd& w) const;

 private:
  MomentSetd moments_;
  std::vector<Objective> objectives_;
  double short_bound_;
};

/// Coefficients of the fourth-order Taylor utility, always derived from lambda.
class UtilityParams {
 public:
  explicit UtilityParams(double lambda);
  double lambda() const { return lambda_; }
  double lambda1() const { return lambda_ * lambda_ / 2.0; }
  double lambda2() const { return lambda_ * lambda_ * lambda_ / 6.0; }
  double lambda3() const { return lambda_ * lambda_ * lambda_ * lambda_ / 24.0; }

 private:
  double lambda_;
};

/// -w'mu + l1 var - l2 skew + l3 kurt.
double utility_objective(const Eigen::VectorXd& w, const PortfolioMop& problem, const UtilityParams& u);
/// Refers to `problem`, which must outlive the returned function.
SmoothFunction utility_function(const PortfolioMop& problem, const UtilityParams& u);

struct UtilityOptions {
  int starts = 16;
  std::uint64_t seed = 0;
  int max_repeats = 20;
  double fixed_point_tol = 1e-6;
  int workers = 1;
  NlpOptions nlp;
};

struct UtilityStep {
  double lambda = 0.0;
  Eigen::VectorXd weights;
  /// Full quartic utility at the weights.
  double utility = 0.0;
  /// Skewness and kurtosis terms frozen for the final solve of this step.
  double frozen_skewness = 0.0;
  double frozen_kurtosis = 0.0;
  int repeats = 0;
  /// Max-norm change of the weights over the last re-freeze.
  double fixed_point_residual = 0.0;
};

/// 20, 18, ..., 2.
std::vector<double> default_lambda_schedule();

/// Local minimization of the full quartic utility from multiple starts.
UtilityStep optimize_utility(const PortfolioMop& problem, const UtilityParams& u, const UtilityOptions& options = {});

/// Frozen higher-moment iteration over a decreasing lambda schedule. At each
/// lambda the skewness and kurtosis terms are evaluated at the previous
/// weights (equal weights for the first step) and held constant while the
/// remaining mean-variance problem is solved; the freeze is then repeated at
/// the new weights until the weights stop moving.
std::vector<UtilityStep> iterative_utility_optimize(const PortfolioMop& problem, const std::vector<double>& schedule,
                                                    const UtilityOptions& options = {});

}  // namespace hmfront
