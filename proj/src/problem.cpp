#include "hmfront/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "hmfront/error.hpp"
#include "hmfront/random.hpp"

namespace hmfront {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Value, gradient and Hessian of one natural-sense statistic.
double statistic(const MomentSetd& m, Objective k, const VectorXd& w, VectorXd* grad, MatrixXd* hess) {
  const Index n = m.assets();
  switch (k) {
    case Objective::mean:
      if (grad) *grad = m.mu();
      if (hess) *hess = MatrixXd::Zero(n, n);
      return w.dot(m.mu());
    case Objective::variance: {
      const VectorXd sw = m.sigma() * w;
      if (grad) *grad = 2.0 * sw;
      if (hess) *hess = 2.0 * m.sigma();
      return w.dot(sw);
    }
    case Objective::skewness: {
      Eigen::Map<const MatrixXd> fold(m.m3().data(), n * n, n);
      const VectorXd h = fold * w;
      const Eigen::Map<const MatrixXd> hw(h.data(), n, n);
      const VectorXd g = hw * w;
      if (grad) *grad = 3.0 * g;
      if (hess) *hess = 6.0 * hw;
      return w.dot(g);
    }
    case Objective::kurtosis: {
      Eigen::Map<const MatrixXd> fold(m.m4().data(), n * n, n * n);
      const VectorXd h = fold * kron(w, w);
      const Eigen::Map<const MatrixXd> hw(h.data(), n, n);
      const VectorXd g = hw * w;
      if (grad) *grad = 4.0 * g;
      if (hess) *hess = 12.0 * hw;
      return w.dot(g);
    }
  }
  return 0.0;
}

}  // namespace

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::mean: return "mean";
    case Objective::variance: return "variance";
    case Objective::skewness: return "skewness";
    case Objective::kurtosis: return "kurtosis";
  }
  return "unknown";
}

Objective parse_objective(const std::string& name) {
  if (name == "mean") return Objective::mean;
  if (name == "variance") return Objective::variance;
  if (name == "skewness") return Objective::skewness;
  if (name == "kurtosis") return Objective::kurtosis;
  throw ParameterError("unknown objective '" + name + "' (expected mean, variance, skewness or kurtosis)");
}

PortfolioMop::PortfolioMop(MomentSetd moments, std::vector<Objective> objectives, double short_bound)
    : moments_(std::move(moments)), objectives_(std::move(objectives)), short_bound_(short_bound) {
  if (objectives_.size() < 2 || objectives_.size() > 4)
    throw ParameterError("problem: between 2 and 4 objectives are required, got " + std::to_string(objectives_.size()));
  std::unordered_set<int> seen;
  for (auto k : objectives_)
    if (!seen.insert(static_cast<int>(k)).second) throw ParameterError("problem: duplicate objective " + to_string(k));
  if (!(short_bound_ >= 0.0) || !std::isfinite(short_bound_))
    throw ParameterError("problem: short_bound must be finite and nonnegative");
}

ObjectiveVectord PortfolioMop::stats(const VectorXd& w) const { return portfolio_stats(w, moments_); }

VectorXd PortfolioMop::to_internal(const ObjectiveVectord& s) const {
  VectorXd f(objective_count());
  for (int i = 0; i < objective_count(); ++i) {
    const Objective k = objectives_[static_cast<std::size_t>(i)];
    f(i) = sense_sign(k) * s[static_cast<int>(k)];
  }
  return f;
}

VectorXd PortfolioMop::evaluate(const VectorXd& w) const {
  detail::check_weights(w, moments_);
  VectorXd f(objective_count());
  for (int i = 0; i < objective_count(); ++i) {
    const Objective k = objectives_[static_cast<std::size_t>(i)];
    f(i) = sense_sign(k) * statistic(moments_, k, w, nullptr, nullptr);
  }
  return f;
}

MatrixXd PortfolioMop::jacobian(const VectorXd& w) const {
  detail::check_weights(w, moments_);
  MatrixXd jac(objective_count(), assets());
  VectorXd g;
  for (int i = 0; i < objective_count(); ++i) {
    const Objective k = objectives_[static_cast<std::size_t>(i)];
    statistic(moments_, k, w, &g, nullptr);
    jac.row(i) = sense_sign(k) * g.transpose();
  }
  return jac;
}

MopDerivatives PortfolioMop::derivatives(const VectorXd& w) const {
  detail::check_weights(w, moments_);
  MopDerivatives d;
  d.value.resize(objective_count());
  d.jacobian.resize(objective_count(), assets());
  VectorXd g;
  MatrixXd h;
  for (int i = 0; i < objective_count(); ++i) {
    const Objective k = objectives_[static_cast<std::size_t>(i)];
    const double s = sense_sign(k);
    d.value(i) = s * statistic(moments_, k, w, &g, &h);
    d.jacobian.row(i) = s * g.transpose();
    d.hessians.push_back(s * h);
  }
  return d;
}

SmoothFunction PortfolioMop::objective_function(int i, Index dimension) const {
  if (i < 0 || i >= objective_count()) throw ParameterError("problem: objective index out of range");
  const Index n = assets();
  const Index dim = dimension == 0 ? n : dimension;
  const Objective k = objectives_[static_cast<std::size_t>(i)];
  const double s = sense_sign(k);
  const MomentSetd* m = &moments_;
  return {[m, k, s, n, dim](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
            VectorXd g;
            MatrixXd h;
            const double v = statistic(*m, k, z.head(n), grad ? &g : nullptr, hess ? &h : nullptr);
            if (grad) {
              grad->setZero(dim);
              grad->head(n) = s * g;
            }
            if (hess) {
              hess->setZero(dim, dim);
              hess->topLeftCorner(n, n) = s * h;
            }
            return s * v;
          },
          true};
}

VectorXd PortfolioMop::lower_bounds() const { return VectorXd::Constant(assets(), -short_bound_); }

VectorXd PortfolioMop::equal_weights() const {
  return VectorXd::Constant(assets(), 1.0 / static_cast<double>(assets()));
}

SmoothFunction PortfolioMop::budget(Index dimension) const {
  const Index n = assets();
  const Index dim = dimension == 0 ? n : dimension;
  return {[n, dim](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
            if (grad) {
              grad->setZero(dim);
              grad->head(n).setConstant(-1.0);
            }
            if (hess) hess->setZero(dim, dim);
            return 1.0 - z.head(n).sum();
          },
          true};
}

double PortfolioMop::infeasibility(const VectorXd& w) const {
  double v = std::abs(1.0 - w.sum());
  for (Index i = 0; i < w.size(); ++i) v = std::max(v, -short_bound_ - w(i));
  return v;
}

UtilityParams::UtilityParams(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ParameterError("utility: lambda must be positive and finite, got " + std::to_string(lambda));
}

double utility_objective(const VectorXd& w, const PortfolioMop& problem, const UtilityParams& u) {
  const auto s = problem.stats(w);
  return -s.mean + u.lambda1() * s.variance - u.lambda2() * s.skewness + u.lambda3() * s.kurtosis;
}

SmoothFunction utility_function(const PortfolioMop& problem, const UtilityParams& u) {
  const MomentSetd* m = &problem.moments();
  const std::array<double, 4> c{-1.0, u.lambda1(), -u.lambda2(), u.lambda3()};
  return {[m, c](const VectorXd& w, VectorXd* grad, MatrixXd* hess) {
            double v = 0.0;
            VectorXd g;
            MatrixXd h;
            if (grad) grad->setZero(w.size());
            if (hess) hess->setZero(w.size(), w.size());
            for (int k = 0; k < 4; ++k) {
              v += c[static_cast<std::size_t>(k)] *
                   statistic(*m, static_cast<Objective>(k), w, grad ? &g : nullptr, hess ? &h : nullptr);
              if (grad) *grad += c[static_cast<std::size_t>(k)] * g;
              if (hess) *hess += c[static_cast<std::size_t>(k)] * h;
            }
            return v;
          },
          true};
}

std::vector<double> default_lambda_schedule() {
  std::vector<double> s;
  for (int l = 20; l >= 2; l -= 2) s.push_back(static_cast<double>(l));
  return s;
}

namespace {

NlpProblem simplex_problem(const PortfolioMop& problem, SmoothFunction objective) {
  NlpProblem p;
  p.objective = std::move(objective);
  p.equalities.push_back(problem.budget());
  p.lower = problem.lower_bounds();
  p.upper = VectorXd::Constant(problem.assets(), kInf);
  p.x0 = problem.equal_weights();
  return p;
}

std::vector<VectorXd> utility_starts(const PortfolioMop& problem, const VectorXd& first, const UtilityOptions& o,
                                     std::uint64_t stream) {
  std::vector<VectorXd> starts{first};
  for (auto& w : dirichlet_samples(problem.assets(), o.starts, o.seed * 1000003u + stream)) starts.push_back(w);
  return starts;
}

}  // namespace

UtilityStep optimize_utility(const PortfolioMop& problem, const UtilityParams& u, const UtilityOptions& options) {
  const NlpProblem p = simplex_problem(problem, utility_function(problem, u));
  const auto r = solve_multistart(p, utility_starts(problem, problem.equal_weights(), options, 0), options.nlp,
                                  options.workers);
  UtilityStep step;
  step.lambda = u.lambda();
  step.weights = r.best.x;
  step.utility = r.best.value;
  const auto s = problem.stats(step.weights);
  step.frozen_skewness = s.skewness;
  step.frozen_kurtosis = s.kurtosis;
  return step;
}

std::vector<UtilityStep> iterative_utility_optimize(const PortfolioMop& problem, const std::vector<double>& schedule,
                                                    const UtilityOptions& options) {
  if (schedule.empty()) throw ParameterError("utility: empty lambda schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    UtilityParams check(schedule[i]);
    if (i > 0 && !(schedule[i] < schedule[i - 1]))
      throw ParameterError("utility: lambda schedule must be strictly decreasing");
  }
  if (options.max_repeats < 1) throw ParameterError("utility: max_repeats must be at least 1");

  const MomentSetd& m = problem.moments();
  std::vector<UtilityStep> out;
  VectorXd w = problem.equal_weights();
  for (std::size_t step_index = 0; step_index < schedule.size(); ++step_index) {
    const UtilityParams u(schedule[step_index]);
    UtilityStep step;
    step.lambda = u.lambda();
    for (int repeat = 1; repeat <= options.max_repeats; ++repeat) {
      const auto frozen = problem.stats(w);
      const double constant = -u.lambda2() * frozen.skewness + u.lambda3() * frozen.kurtosis;
      const double l1 = u.lambda1();
      const SmoothFunction quadratic{[&m, l1, constant](const VectorXd& x, VectorXd* grad, MatrixXd* hess) {
                                       const VectorXd sx = m.sigma() * x;
                                       if (grad) *grad = -m.mu() + 2.0 * l1 * sx;
                                       if (hess) *hess = 2.0 * l1 * m.sigma();
                                       return -x.dot(m.mu()) + l1 * x.dot(sx) + constant;
                                     },
                                     true};
      const auto r = solve_multistart(simplex_problem(problem, quadratic),
                                      utility_starts(problem, w, options, step_index * 64 + std::uint64_t(repeat)),
                                      options.nlp, options.workers);
      step.frozen_skewness = frozen.skewness;
      step.frozen_kurtosis = frozen.kurtosis;
      step.repeats = repeat;
      step.fixed_point_residual = (r.best.x - w).cwiseAbs().maxCoeff();
      w = r.best.x;
      if (step.fixed_point_residual <= options.fixed_point_tol) break;
    }
    step.weights = w;
    step.utility = utility_objective(w, problem, u);
    out.push_back(step);
  }
  return out;
}

}  // namespace hmfront
