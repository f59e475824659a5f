#include "hmfront/scalarization.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "hmfront/error.hpp"
#include "hmfront/parallel.hpp"
#include "hmfront/random.hpp"

namespace hmfront {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// coef * F_i(w) + constant + aux_coef * z(n) on z = (w, aux).
SmoothFunction image_row(const PortfolioMop& p, int i, double coef, double constant, double aux_coef) {
  const Index n = p.assets();
  const SmoothFunction fi = p.objective_function(i, n + 1);
  return {[fi, n, coef, constant, aux_coef](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
            const double v = fi.eval(z, grad, hess);
            if (grad) {
              *grad *= coef;
              (*grad)(n) += aux_coef;
            }
            if (hess) *hess *= coef;
            return coef * v + constant + aux_coef * z(n);
          },
          true};
}

// sign * z(n), the objective of the single-aux methods.
SmoothFunction aux_objective(Index n, double sign) {
  return {[n, sign](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
            if (grad) {
              grad->setZero(z.size());
              (*grad)(n) = sign;
            }
            if (hess) hess->setZero(z.size(), z.size());
            return sign * z(n);
          },
          true};
}

NlpProblem aux_problem(const PortfolioMop& p, Index extra) {
  const Index n = p.assets();
  NlpProblem q;
  q.lower = VectorXd::Constant(n + extra, -kInf);
  q.lower.head(n) = p.lower_bounds();
  q.upper = VectorXd::Constant(n + extra, kInf);
  return q;
}

void check_length(const VectorXd& v, Index size, const char* what) {
  if (v.size() != size)
    throw ShapeError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                     std::to_string(size));
  if (!v.allFinite()) throw ParameterError(std::string(what) + " must be finite");
}

std::vector<VectorXd> start_weights(const PortfolioMop& p, const VectorXd& first, const ScalarizationOptions& o) {
  std::vector<VectorXd> starts;
  if (o.default_start || o.starts.empty()) starts.push_back(first);
  for (const auto& w : o.starts) {
    check_length(w, p.assets(), "start");
    starts.push_back(w);
  }
  return starts;
}

// Solves from every start, keeping the best converged local solution. When
// nothing converges the first start's result is returned as is.
ScalarSolution solve_from(const NlpProblem& base, const std::vector<VectorXd>& starts, const ScalarizationOptions& o) {
  std::vector<ScalarSolution> locals(starts.size());
  parallel_for(starts.size(), o.workers, [&](std::size_t i) {
    NlpProblem q = base;
    q.x0 = starts[i];
    locals[i] = solve(q, o.nlp);
  });
  const ScalarSolution* best = nullptr;
  for (const auto& s : locals) {
    if (!s.converged()) continue;
    if (!best || s.value < best->value || (s.value == best->value && lexicographic_less(s.x, best->x))) best = &s;
  }
  return best ? *best : locals.front();
}

ScalarizationResult finish(const PortfolioMop& p, ScalarSolution sol, bool has_aux, bool equality_rows, int rows) {
  const Index n = p.assets();
  ScalarizationResult r;
  r.weights = sol.x.head(n);
  r.aux = has_aux ? sol.x(n) : 0.0;
  r.image = p.evaluate(r.weights);
  r.multipliers = equality_rows ? VectorXd(sol.eq_multipliers.head(rows)) : VectorXd(sol.ineq_multipliers.head(rows));
  r.budget_multiplier = sol.eq_multipliers(sol.eq_multipliers.size() - 1);
  if (!sol.converged()) r.message = "solver status " + to_string(sol.status);
  r.solution = std::move(sol);
  return r;
}

VectorXd sf_reference(const PortfolioMop& p, const SfParams& sf) {
  const int m = p.objective_count();
  if (sf.kind == SfParams::Reference::weights) {
    check_length(sf.reference, p.assets(), "SF reference weights");
    return p.evaluate(sf.reference);
  }
  check_length(sf.reference, m, "SF reference objectives");
  return sf.reference;
}

ScalarizationResult solve_shortage(const PortfolioMop& p, const SfParams& sf, bool equality,
                                   const ScalarizationOptions& o) {
  const Index n = p.assets();
  const int m = p.objective_count();
  check_length(sf.g, m, "SF direction g");
  if (sf.g.cwiseAbs().maxCoeff() == 0.0) throw ParameterError("SF direction g must not be zero");
  if (!equality && sf.g.minCoeff() < 0.0) throw ParameterError("SF direction g must be nonnegative");
  const VectorXd c = sf_reference(p, sf);

  // c_i - delta g_i - F_i(w) >= 0 (or = 0).
  NlpProblem q = aux_problem(p, 1);
  q.objective = aux_objective(n, -1.0);
  for (int i = 0; i < m; ++i) (equality ? q.equalities : q.inequalities).push_back(image_row(p, i, -1.0, c(i), -sf.g(i)));
  q.equalities.push_back(p.budget(n + 1));

  const VectorXd first = sf.kind == SfParams::Reference::weights ? sf.reference : p.equal_weights();
  std::vector<VectorXd> starts;
  for (const auto& w : start_weights(p, first, o)) {
    const VectorXd gap = c - p.evaluate(w);
    double delta = 0.0;
    if (equality) {
      delta = sf.g.dot(gap) / sf.g.squaredNorm();
    } else {
      delta = kInf;
      for (int i = 0; i < m; ++i)
        if (sf.g(i) > 0.0) delta = std::min(delta, gap(i) / sf.g(i));
    }
    VectorXd z(n + 1);
    z << w, delta;
    starts.push_back(z);
  }
  return finish(p, solve_from(q, starts, o), true, equality, m);
}

Eigen::Index checked_m(const PortfolioMop& p, const NbiParams& nbi) {
  const int m = p.objective_count();
  check_length(nbi.beta, m, "NBI beta");
  check_length(nbi.ideal, m, "NBI ideal point");
  check_length(nbi.nbar, m, "NBI normal");
  if (nbi.phi.rows() != m || nbi.phi.cols() != m) throw ShapeError("NBI phi must be m x m");
  if (nbi.beta.minCoeff() < 0.0 || std::abs(nbi.beta.sum() - 1.0) > 1e-10)
    throw ParameterError("NBI beta must lie on the unit simplex");
  return m;
}

}  // namespace

ScalarizationResult solve_sf(const PortfolioMop& problem, const SfParams& sf, const ScalarizationOptions& options) {
  return solve_shortage(problem, sf, false, options);
}

ScalarizationResult solve_msf(const PortfolioMop& problem, const SfParams& sf, const ScalarizationOptions& options) {
  return solve_shortage(problem, sf, true, options);
}

ScalarizationResult solve_nbi(const PortfolioMop& problem, const NbiParams& nbi, const ScalarizationOptions& options) {
  const Index n = problem.assets();
  const Index m = checked_m(problem, nbi);
  const VectorXd hull = nbi.ideal + nbi.phi * nbi.beta;

  // F_j(w) - hull_j - s nbar_j = 0.
  NlpProblem q = aux_problem(problem, 1);
  q.objective = aux_objective(n, -1.0);
  for (int j = 0; j < m; ++j) q.equalities.push_back(image_row(problem, j, 1.0, -hull(j), -nbi.nbar(j)));
  q.equalities.push_back(problem.budget(n + 1));

  std::vector<VectorXd> starts;
  for (const auto& w : start_weights(problem, problem.equal_weights(), options)) {
    VectorXd z(n + 1);
    z << w, nbi.nbar.dot(problem.evaluate(w) - hull) / nbi.nbar.squaredNorm();
    starts.push_back(z);
  }
  return finish(problem, solve_from(q, starts, options), true, true, int(m));
}

ScalarizationResult solve_sp(const PortfolioMop& problem, const SpParams& sp, bool modified,
                             const ScalarizationOptions& options) {
  const Index n = problem.assets();
  const int m = problem.objective_count();
  check_length(sp.a, m, "SP reference a");
  check_length(sp.r, m, "SP direction r");
  const VectorXd offset = sp.offset.size() == 0 ? VectorXd::Zero(m) : sp.offset;
  check_length(offset, m, "SP offset");
  if (sp.r.cwiseAbs().maxCoeff() == 0.0) throw ParameterError("SP direction r must not be zero");

  // a_i + t r_i - F_i(w) - offset_i >= 0 (or = 0).
  NlpProblem q = aux_problem(problem, 1);
  q.objective = aux_objective(n, 1.0);
  for (int i = 0; i < m; ++i)
    (modified ? q.equalities : q.inequalities).push_back(image_row(problem, i, -1.0, sp.a(i) - offset(i), sp.r(i)));
  q.equalities.push_back(problem.budget(n + 1));

  std::vector<VectorXd> starts;
  for (const auto& w : start_weights(problem, problem.equal_weights(), options)) {
    const VectorXd gap = problem.evaluate(w) + offset - sp.a;
    double t = 0.0;
    if (modified) {
      t = sp.r.dot(gap) / sp.r.squaredNorm();
    } else {
      t = -kInf;
      for (int i = 0; i < m; ++i)
        if (sp.r(i) > 0.0) t = std::max(t, gap(i) / sp.r(i));
      if (!std::isfinite(t)) t = 0.0;
    }
    VectorXd z(n + 1);
    z << w, t;
    starts.push_back(z);
  }
  return finish(problem, solve_from(q, starts, options), true, modified, m);
}

ScalarizationResult solve_epsilon(const PortfolioMop& problem, const VectorXd& eps, int k,
                                  const ScalarizationOptions& options) {
  const Index n = problem.assets();
  const int m = problem.objective_count();
  if (k < 0 || k >= m) throw ParameterError("epsilon: minimized objective index out of range");
  if (eps.size() != m) throw ShapeError("epsilon: need one bound per objective");

  NlpProblem q;
  q.objective = problem.objective_function(k);
  std::vector<int> rows;
  for (int i = 0; i < m; ++i) {
    if (i == k) continue;
    if (!std::isfinite(eps(i))) throw ParameterError("epsilon: bounds must be finite");
    const SmoothFunction fi = problem.objective_function(i);
    const double e = eps(i);
    q.inequalities.push_back({[fi, e](const VectorXd& w, VectorXd* grad, MatrixXd* hess) {
                                const double v = fi.eval(w, grad, hess);
                                if (grad) *grad = -*grad;
                                if (hess) *hess = -*hess;
                                return e - v;
                              },
                              true});
    rows.push_back(i);
  }
  q.equalities.push_back(problem.budget());
  q.lower = problem.lower_bounds();
  q.upper = VectorXd::Constant(n, kInf);

  ScalarSolution sol = solve_from(q, start_weights(problem, problem.equal_weights(), options), options);
  ScalarizationResult r;
  r.weights = sol.x;
  r.aux = sol.value;
  r.image = problem.evaluate(r.weights);
  r.multipliers = VectorXd::Zero(m);
  for (std::size_t j = 0; j < rows.size(); ++j) r.multipliers(rows[j]) = sol.ineq_multipliers(Index(j));
  r.budget_multiplier = sol.eq_multipliers(0);
  if (!sol.converged()) r.message = "solver status " + to_string(sol.status);
  r.solution = std::move(sol);
  return r;
}

Anchors compute_anchors(const PortfolioMop& problem, const ScalarizationOptions& options, int extra_starts,
                        std::uint64_t seed) {
  const Index n = problem.assets();
  const int m = problem.objective_count();
  std::vector<VectorXd> starts{problem.equal_weights()};
  for (auto& w : dirichlet_samples(n, extra_starts, seed)) starts.push_back(w);
  for (const auto& w : options.starts) starts.push_back(w);

  Anchors a;
  a.weights.resize(n, m);
  a.ideal.resize(m);
  for (int i = 0; i < m; ++i) {
    NlpProblem q;
    q.objective = problem.objective_function(i);
    q.equalities.push_back(problem.budget());
    q.lower = problem.lower_bounds();
    q.upper = VectorXd::Constant(n, kInf);
    q.x0 = starts.front();
    const auto r = solve_multistart(q, starts, options.nlp, options.workers);
    a.weights.col(i) = r.best.x;
    a.ideal(i) = r.best.value;
  }
  a.phi.resize(m, m);
  for (int i = 0; i < m; ++i) a.phi.col(i) = problem.evaluate(a.weights.col(i)) - a.ideal;

  const Eigen::FullPivLU<MatrixXd> lu(a.phi.transpose());
  VectorXd normal;
  if (lu.rank() == m) {
    normal = lu.solve(VectorXd::Ones(m));
  } else {
    normal = -a.phi * VectorXd::Ones(m);
  }
  if (normal.norm() == 0.0) normal = -VectorXd::Ones(m);
  normal.normalize();
  if (normal.sum() > 0.0) normal = -normal;
  a.nbar = normal;
  return a;
}

NbiParams nbi_params(const Anchors& anchors, VectorXd beta) {
  return {std::move(beta), anchors.ideal, anchors.phi, anchors.nbar};
}

SfParams map_nbi_to_msf(const NbiParams& nbi) {
  return SfParams::from_objectives(nbi.ideal + nbi.phi * nbi.beta, -nbi.nbar);
}

SpParams map_sf_to_sp(const PortfolioMop& problem, const SfParams& sf, const ObjectiveVectord& at) {
  const int m = problem.objective_count();
  const VectorXd c = sf_reference(problem, sf);
  check_length(sf.g, m, "SF direction g");
  SpParams sp{VectorXd(m), sf.g, VectorXd::Zero(m)};
  for (int i = 0; i < m; ++i) {
    const Objective k = problem.objectives()[std::size_t(i)];
    if (sense_sign(k) < 0.0) {
      // Natural value of the reference is -c_i.
      const double x = at[static_cast<int>(k)];
      sp.a(i) = 2.0 * x + c(i);
      sp.offset(i) = 2.0 * x;
    } else {
      sp.a(i) = c(i);
    }
  }
  return sp;
}

SpParams map_nbi_to_sp(const NbiParams& nbi) {
  const auto m = nbi.beta.size();
  return {nbi.ideal + nbi.phi * nbi.beta, -nbi.nbar, VectorXd::Zero(m)};
}

SpParams epsilon_as_sp(const VectorXd& eps, int k) {
  const auto m = eps.size();
  if (k < 0 || k >= m) throw ParameterError("epsilon: minimized objective index out of range");
  SpParams sp{eps, VectorXd::Zero(m), VectorXd::Zero(m)};
  sp.a(k) = 0.0;
  sp.r(k) = 1.0;
  return sp;
}

namespace {

int stat_index(const PortfolioMop& p, Objective k) {
  for (int i = 0; i < p.objective_count(); ++i)
    if (p.objectives()[std::size_t(i)] == k) return i;
  return -1;
}

void require_pgp_problem(const PortfolioMop& p) {
  if (stat_index(p, Objective::mean) != 0 || stat_index(p, Objective::variance) != 1 ||
      stat_index(p, Objective::skewness) != 2)
    throw ParameterError("goal program: objectives must start with mean, variance, skewness");
}

// Natural statistic k of the first n entries of z, with derivatives padded to z's size.
SmoothFunction natural(const PortfolioMop& p, Objective k, Index dim, double coef, double constant) {
  const int i = stat_index(p, k);
  const SmoothFunction f = p.objective_function(i, dim);
  const double c = coef * sense_sign(k);
  return {[f, c, constant](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
            const double v = f.eval(z, grad, hess);
            if (grad) *grad *= c;
            if (hess) *hess *= c;
            return c * v + constant;
          },
          true};
}

}  // namespace

PgpBounds pgp_bounds(const PortfolioMop& problem, const ScalarizationOptions& options) {
  require_pgp_problem(problem);
  const Index n = problem.assets();

  // Attainability of variance = 1 on the feasible set.
  NlpProblem minvar;
  minvar.objective = problem.objective_function(1);
  minvar.equalities.push_back(problem.budget());
  minvar.lower = problem.lower_bounds();
  minvar.upper = VectorXd::Constant(n, kInf);
  minvar.x0 = problem.equal_weights();
  const auto mv = solve(minvar, options.nlp);
  if (mv.converged() && mv.value > 1.0 + 1e-10)
    throw SolverError("goal program: variance = 1 is unattainable, the minimum variance is " +
                      std::to_string(mv.value) + "; rescale the returns");
  if (problem.short_bound() == 0.0 && problem.moments().sigma().diagonal().maxCoeff() < 1.0 - 1e-10)
    throw SolverError("goal program: variance = 1 is unattainable, the maximum variance is " +
                      std::to_string(problem.moments().sigma().diagonal().maxCoeff()) + "; rescale the returns");

  std::vector<VectorXd> starts{problem.equal_weights()};
  for (Index j = 0; j < n; ++j) starts.push_back(VectorXd::Unit(n, j));
  for (auto& w : dirichlet_samples(n, 8, 0)) starts.push_back(w);
  for (const auto& w : options.starts) starts.push_back(w);

  PgpBounds b;
  for (Objective k : {Objective::mean, Objective::skewness}) {
    NlpProblem q;
    q.objective = natural(problem, k, n, -1.0, 0.0);
    q.equalities.push_back(natural(problem, Objective::variance, n, 1.0, -1.0));
    q.equalities.push_back(problem.budget());
    q.lower = problem.lower_bounds();
    q.upper = VectorXd::Constant(n, kInf);
    q.x0 = starts.front();
    MultiStartResult r;
    try {
      r = solve_multistart(q, starts, options.nlp, options.workers);
    } catch (const SolverError& e) {
      throw SolverError(std::string("goal program: bound problem for ") + to_string(k) + " failed: " + e.what());
    }
    if (k == Objective::mean) {
      b.z1_star = -r.best.value;
      b.z1_weights = r.best.x;
    } else {
      b.z3_star = -r.best.value;
      b.z3_weights = r.best.x;
    }
  }
  return b;
}

ScalarizationResult solve_pgp(const PortfolioMop& problem, PgpParams params, const ScalarizationOptions& options) {
  require_pgp_problem(problem);
  if (!(params.alpha > 0.0) || !(params.beta > 0.0) || !std::isfinite(params.alpha) || !std::isfinite(params.beta))
    throw ParameterError("goal program: exponents must be positive and finite");
  const Index n = problem.assets();
  std::vector<VectorXd> seeds{problem.equal_weights()};
  if (!params.z1_star || !params.z3_star) {
    const PgpBounds b = pgp_bounds(problem, options);
    params.z1_star = b.z1_star;
    params.z3_star = b.z3_star;
    seeds.push_back(b.z1_weights);
    seeds.push_back(b.z3_weights);
  }
  const double z1 = *params.z1_star;
  const double z3 = *params.z3_star;
  const double alpha = params.alpha;
  const double beta = params.beta;
  const Index dim = n + 2;

  NlpProblem q;
  q.objective = {[n, alpha, beta](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
                   // Derivatives are evaluated slightly inside the bound so that
                   // fractional exponents stay finite at zero shortfall.
                   const double d1 = std::max(z(n), 0.0);
                   const double d3 = std::max(z(n + 1), 0.0);
                   const double e1 = std::max(d1, 1e-12);
                   const double e3 = std::max(d3, 1e-12);
                   if (grad) {
                     grad->setZero(z.size());
                     (*grad)(n) = alpha * std::pow(e1, alpha - 1.0);
                     (*grad)(n + 1) = beta * std::pow(e3, beta - 1.0);
                   }
                   if (hess) {
                     hess->setZero(z.size(), z.size());
                     (*hess)(n, n) = alpha * (alpha - 1.0) * std::pow(e1, alpha - 2.0);
                     (*hess)(n + 1, n + 1) = beta * (beta - 1.0) * std::pow(e3, beta - 2.0);
                   }
                   return std::pow(d1, alpha) + std::pow(d3, beta);
                 },
                 true};
  // mean + d1 - z1* = 0, variance - 1 = 0, skewness + d3 - z3* = 0.
  const SmoothFunction mean = natural(problem, Objective::mean, dim, 1.0, -z1);
  const SmoothFunction skew = natural(problem, Objective::skewness, dim, 1.0, -z3);
  auto with_slack = [n](SmoothFunction f, Index slot) -> SmoothFunction {
    return {[f, n, slot](const VectorXd& z, VectorXd* grad, MatrixXd* hess) {
              const double v = f.eval(z, grad, hess);
              if (grad) (*grad)(n + slot) = 1.0;
              return v + z(n + slot);
            },
            true};
  };
  q.equalities.push_back(with_slack(mean, 0));
  q.equalities.push_back(natural(problem, Objective::variance, dim, 1.0, -1.0));
  q.equalities.push_back(with_slack(skew, 1));
  q.equalities.push_back(problem.budget(dim));
  q.lower = VectorXd::Constant(dim, 0.0);
  q.lower.head(n) = problem.lower_bounds();
  q.upper = VectorXd::Constant(dim, kInf);

  for (const auto& w : options.starts) {
    check_length(w, n, "start");
    seeds.push_back(w);
  }
  std::vector<VectorXd> starts;
  for (const auto& w : seeds) {
    const auto s = problem.stats(w);
    VectorXd z(dim);
    z << w, std::max(z1 - s.mean, 0.0), std::max(z3 - s.skewness, 0.0);
    starts.push_back(z);
  }
  ScalarSolution sol = solve_from(q, starts, options);
  ScalarizationResult r;
  r.weights = sol.x.head(n);
  r.aux = sol.value;
  r.image = problem.evaluate(r.weights);
  r.multipliers = sol.eq_multipliers.head(3);
  r.budget_multiplier = sol.eq_multipliers(3);
  if (!sol.converged()) r.message = "solver status " + to_string(sol.status);
  r.solution = std::move(sol);
  return r;
}

namespace {

// Root of a x^(a-1) = target in a on (0, 10] by bisection over the first
// sign change of a fine scan.
std::optional<double> exponent_root(double x, double target) {
  auto phi = [&](double a) { return a * std::pow(x, a - 1.0) - target; };
  const int cells = 1000;
  double lo = 1e-12;
  double flo = phi(lo);
  for (int c = 1; c <= cells; ++c) {
    const double hi = 10.0 * c / cells;
    const double fhi = phi(hi);
    if (flo == 0.0) return lo;
    if ((flo < 0.0) != (fhi < 0.0)) {
      double a = lo, b = hi, fa = flo;
      for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, b); ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = phi(mid);
        if ((fa < 0.0) == (fm < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      return 0.5 * (a + b);
    }
    lo = hi;
    flo = fhi;
  }
  return std::nullopt;
}

}  // namespace

PgpKktReport check_pgp_kkt(const PortfolioMop& problem, const NbiParams& nbi, const ScalarizationResult& nbi_solution,
                           const PgpBounds& bounds) {
  require_pgp_problem(problem);
  PgpKktReport rep;
  const auto s = problem.stats(nbi_solution.weights);
  rep.d1 = bounds.z1_star - s.mean;
  rep.d3 = bounds.z3_star - s.skewness;
  const VectorXd& lambda = nbi_solution.multipliers;
  // NBI rows are F_j - ... with F = (-mean, variance, -skewness, ...).
  rep.mu1 = -lambda(0);
  rep.mu2 = lambda(1);
  rep.mu3 = -lambda(2);
  rep.nbar_dot_lambda = nbi.nbar.dot(lambda);
  rep.mu2_vanishes = std::abs(rep.mu2) <= 1e-6;
  if (!nbi_solution.converged()) {
    rep.reason = "NBI solution did not converge";
    return rep;
  }
  if (!(rep.d1 > 0.0) || !(rep.d3 > 0.0)) {
    rep.reason = "degenerate shortfall (d1 or d3 not positive)";
    return rep;
  }
  rep.applicable = true;

  const auto d = stats_gradients(VectorXd(nbi_solution.weights), problem.moments());
  const Index n = problem.assets();
  const auto& sol = nbi_solution.solution;
  VectorXd station = rep.mu1 * d.gradient[0] + rep.mu2 * d.gradient[1] + rep.mu3 * d.gradient[2];
  for (int j = 3; j < problem.objective_count(); ++j)
    station += lambda(j) * problem.jacobian(nbi_solution.weights).row(j).transpose();
  station -= nbi_solution.budget_multiplier * VectorXd::Ones(n);
  station -= sol.lower_multipliers.head(n);
  station += sol.upper_multipliers.head(n);
  rep.first_set_residual = station.norm();

  rep.alpha = exponent_root(rep.d1, -rep.mu1);
  rep.beta = exponent_root(rep.d3, -rep.mu3);
  if (rep.alpha && rep.beta) {
    const double r1 = std::abs(*rep.alpha * std::pow(rep.d1, *rep.alpha - 1.0) + rep.mu1);
    const double r3 = std::abs(*rep.beta * std::pow(rep.d3, *rep.beta - 1.0) + rep.mu3);
    rep.second_set_residual = std::max(r1, r3);
  } else {
    rep.reason = "no exponent in (0, 10] satisfies the shortfall stationarity";
  }
  return rep;
}

}  // namespace hmfront
