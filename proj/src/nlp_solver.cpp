#include "hmfront/nlp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hmfront/error.hpp"
#include "hmfront/parallel.hpp"
#include "hmfront/qp.hpp"

namespace hmfront {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;


struct Evaluation {
  double f = 0.0;
  VectorXd grad;
  MatrixXd hess;
  VectorXd ce;
  MatrixXd ae;
  std::vector<MatrixXd> he;
  VectorXd ci;
  MatrixXd ai;
  std::vector<MatrixXd> hi;
};

bool has_exact_hessian(const NlpProblem& p) {
  if (!p.objective.has_hessian) return false;
  for (const auto& c : p.equalities)
    if (!c.has_hessian) return false;
  for (const auto& c : p.inequalities)
    if (!c.has_hessian) return false;
  return true;
}

Evaluation evaluate(const NlpProblem& p, const VectorXd& x, bool derivatives, bool hessians) {
  const Index n = x.size();
  const auto ne = static_cast<Index>(p.equalities.size());
  const auto ni = static_cast<Index>(p.inequalities.size());
  Evaluation e;
  e.ce.resize(ne);
  e.ci.resize(ni);
  if (derivatives) {
    e.grad.resize(n);
    e.ae.resize(ne, n);
    e.ai.resize(ni, n);
  }
  VectorXd g(n);
  MatrixXd h(n, n);
  e.f = p.objective.eval(x, derivatives ? &e.grad : nullptr, hessians ? &e.hess : nullptr);
  for (Index j = 0; j < ne; ++j) {
    e.ce(j) = p.equalities[static_cast<std::size_t>(j)].eval(x, derivatives ? &g : nullptr, hessians ? &h : nullptr);
    if (derivatives) e.ae.row(j) = g.transpose();
    if (hessians) e.he.push_back(h);
  }
  for (Index i = 0; i < ni; ++i) {
    e.ci(i) = p.inequalities[static_cast<std::size_t>(i)].eval(x, derivatives ? &g : nullptr, hessians ? &h : nullptr);
    if (derivatives) e.ai.row(i) = g.transpose();
    if (hessians) e.hi.push_back(h);
  }
  return e;
}

double violation_l1(const Evaluation& e) {
  return e.ce.cwiseAbs().sum() + (-e.ci).cwiseMax(0.0).sum();
}

double violation_inf(const Evaluation& e) {
  double v = e.ce.size() ? e.ce.cwiseAbs().maxCoeff() : 0.0;
  if (e.ci.size()) v = std::max(v, (-e.ci).cwiseMax(0.0).maxCoeff());
  return v;
}

// Symmetric positive definite model of the Lagrangian Hessian: negative
// eigenvalues are mirrored and tiny ones lifted to a floor.
MatrixXd convexify(const MatrixXd& h, double floor_rel) {
  const MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  const double floor = floor_rel * scale;
  bool changed = false;
  for (Index i = 0; i < ev.size(); ++i) {
    const double v = std::max(std::abs(ev(i)), floor);
    if (v != ev(i)) changed = true;
    ev(i) = v;
  }
  if (!changed) return sym;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct StepModel {
  VectorXd d;
  VectorXd lambda;
  VectorXd mu;
  VectorXd zl;
  VectorXd zu;
  bool elastic = false;
  double elastic_slack = 0.0;
  bool ok = false;
};

// Builds and solves the QP subproblem around x. Equality/inequality
// right-hand sides are passed explicitly so the same routine serves the
// second-order correction.
StepModel solve_subproblem(const NlpProblem& p, const VectorXd& x, const MatrixXd& hm, const VectorXd& grad,
                           const MatrixXd& ae, const VectorXd& ce, const MatrixXd& ai, const VectorXd& ci,
                           double elastic_weight, bool allow_elastic) {
  const Index n = x.size();
  const Index ne = ae.rows();
  const Index ni = ai.rows();

  std::vector<Index> lower_idx;
  std::vector<Index> upper_idx;
  for (Index k = 0; k < n; ++k) {
    if (std::isfinite(p.lower(k))) lower_idx.push_back(k);
    if (std::isfinite(p.upper(k))) upper_idx.push_back(k);
  }
  const auto nl = static_cast<Index>(lower_idx.size());
  const auto nu = static_cast<Index>(upper_idx.size());

  auto attempt = [&](bool elastic) -> StepModel {
    const Index ns = elastic ? 2 * ne + ni : 0;
    const Index nv = n + ns;
    qp::QpProblem q;
    q.hessian = MatrixXd::Zero(nv, nv);
    q.hessian.topLeftCorner(n, n) = hm;
    q.linear = VectorXd::Zero(nv);
    q.linear.head(n) = grad;
    if (elastic) {
      // Quadratic slack cost on the scale of the linear one keeps the
      // unconstrained QP minimizer, where the dual method starts, near the origin.
      q.hessian.bottomRightCorner(ns, ns) = elastic_weight * MatrixXd::Identity(ns, ns);
      q.linear.tail(ns).setConstant(elastic_weight);
    }
    q.eq_matrix = MatrixXd::Zero(ne, nv);
    q.eq_matrix.leftCols(n) = ae;
    q.eq_rhs = -ce;
    const Index n_in = ni + nl + nu + ns;
    q.ineq_matrix = MatrixXd::Zero(n_in, nv);
    q.ineq_rhs = VectorXd::Zero(n_in);
    q.ineq_matrix.topLeftCorner(ni, n) = ai;
    q.ineq_rhs.head(ni) = -ci;
    for (Index k = 0; k < nl; ++k) {
      const Index v = lower_idx[static_cast<std::size_t>(k)];
      q.ineq_matrix(ni + k, v) = 1.0;
      q.ineq_rhs(ni + k) = p.lower(v) - x(v);
    }
    for (Index k = 0; k < nu; ++k) {
      const Index v = upper_idx[static_cast<std::size_t>(k)];
      q.ineq_matrix(ni + nl + k, v) = -1.0;
      q.ineq_rhs(ni + nl + k) = x(v) - p.upper(v);
    }
    if (elastic) {
      for (Index j = 0; j < ne; ++j) {
        q.eq_matrix(j, n + j) = -1.0;
        q.eq_matrix(j, n + ne + j) = 1.0;
      }
      for (Index i = 0; i < ni; ++i) q.ineq_matrix(i, n + 2 * ne + i) = 1.0;
      for (Index k = 0; k < ns; ++k) q.ineq_matrix(ni + nl + nu + k, n + k) = 1.0;
    }

    const qp::QpResult r = qp::solve(q);
    StepModel s;
    s.elastic = elastic;
    if (r.status != qp::QpStatus::optimal) return s;
    s.ok = true;
    s.d = r.x.head(n);
    s.lambda = -r.eq_multipliers;
    s.mu = r.ineq_multipliers.head(ni);
    s.zl = VectorXd::Zero(n);
    s.zu = VectorXd::Zero(n);
    for (Index k = 0; k < nl; ++k) s.zl(lower_idx[static_cast<std::size_t>(k)]) = r.ineq_multipliers(ni + k);
    for (Index k = 0; k < nu; ++k) s.zu(upper_idx[static_cast<std::size_t>(k)]) = r.ineq_multipliers(ni + nl + k);
    if (elastic) s.elastic_slack = r.x.tail(ns).sum();
    return s;
  };

  StepModel s = attempt(false);
  if (!s.ok && allow_elastic) s = attempt(true);
  return s;
}

VectorXd clamp_to_bounds(const NlpProblem& p, VectorXd x) {
  return x.cwiseMax(p.lower).cwiseMin(p.upper);
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

bool lexicographic_less(const VectorXd& a, const VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

KktReport kkt_report(const NlpProblem& problem, const ScalarSolution& s) {
  const Evaluation e = evaluate(problem, s.x, true, false);
  KktReport r;
  VectorXd stat = e.grad;
  if (e.ai.rows()) stat -= e.ai.transpose() * s.ineq_multipliers;
  if (e.ae.rows()) stat += e.ae.transpose() * s.eq_multipliers;
  stat -= s.lower_multipliers;
  stat += s.upper_multipliers;
  r.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  r.feasibility = violation_inf(e);
  for (Index k = 0; k < s.x.size(); ++k) {
    r.feasibility = std::max({r.feasibility, problem.lower(k) - s.x(k), s.x(k) - problem.upper(k)});
    if (std::isfinite(problem.lower(k)))
      r.complementarity = std::max(r.complementarity, std::abs(s.lower_multipliers(k) * (s.x(k) - problem.lower(k))));
    if (std::isfinite(problem.upper(k)))
      r.complementarity = std::max(r.complementarity, std::abs(s.upper_multipliers(k) * (problem.upper(k) - s.x(k))));
  }
  for (Index i = 0; i < e.ci.size(); ++i)
    r.complementarity = std::max(r.complementarity, std::abs(s.ineq_multipliers(i) * e.ci(i)));
  double dual = 0.0;
  if (s.ineq_multipliers.size()) dual = std::max(dual, -s.ineq_multipliers.minCoeff());
  if (s.lower_multipliers.size()) dual = std::max(dual, -s.lower_multipliers.minCoeff());
  if (s.upper_multipliers.size()) dual = std::max(dual, -s.upper_multipliers.minCoeff());
  r.dual_infeasibility = dual;
  return r;
}

// Multipliers minimizing the stationarity residual at x over the constraints
// that the last QP kept active. Inequality and bound signs are clipped.
static void least_squares_multipliers(const NlpProblem& problem, const Evaluation& e, ScalarSolution& s) {
  const Index n = s.x.size();
  const Index ne = e.ae.rows();
  const Index ni = e.ai.rows();
  std::vector<Index> ineq, low, up;
  for (Index i = 0; i < ni; ++i)
    if (s.ineq_multipliers(i) > 0.0) ineq.push_back(i);
  for (Index k = 0; k < n; ++k) {
    if (s.lower_multipliers(k) > 0.0 && std::isfinite(problem.lower(k))) low.push_back(k);
    if (s.upper_multipliers(k) > 0.0 && std::isfinite(problem.upper(k))) up.push_back(k);
  }
  const Index cols = ne + static_cast<Index>(ineq.size() + low.size() + up.size());
  if (cols == 0) return;
  MatrixXd m = MatrixXd::Zero(n, cols);
  Index c = 0;
  if (ne) m.leftCols(ne) = e.ae.transpose();
  c = ne;
  for (Index i : ineq) m.col(c++) = -e.ai.row(i).transpose();
  for (Index k : low) m(k, c++) = -1.0;
  for (Index k : up) m(k, c++) = 1.0;
  const VectorXd nu = m.completeOrthogonalDecomposition().solve(-e.grad);
  if (!nu.allFinite()) return;
  if (ne) s.eq_multipliers = nu.head(ne);
  c = ne;
  for (Index i : ineq) s.ineq_multipliers(i) = std::max(0.0, nu(c++));
  for (Index k : low) s.lower_multipliers(k) = std::max(0.0, nu(c++));
  for (Index k : up) s.upper_multipliers(k) = std::max(0.0, nu(c++));
}

ScalarSolution solve(const NlpProblem& problem, const NlpOptions& options) {
  const Index n = problem.x0.size();
  if (problem.lower.size() != n || problem.upper.size() != n)
    throw ShapeError("nlp: bounds and starting point differ in length");
  if (!problem.x0.allFinite()) throw ParameterError("nlp: starting point is not finite");
  for (Index k = 0; k < n; ++k)
    if (problem.lower(k) > problem.upper(k)) throw ParameterError("nlp: inconsistent bounds");

  const bool exact = has_exact_hessian(problem);
  const auto ne = static_cast<Index>(problem.equalities.size());
  const auto ni = static_cast<Index>(problem.inequalities.size());

  ScalarSolution out;
  out.x = clamp_to_bounds(problem, problem.x0);
  out.eq_multipliers = VectorXd::Zero(ne);
  out.ineq_multipliers = VectorXd::Zero(ni);
  out.lower_multipliers = VectorXd::Zero(n);
  out.upper_multipliers = VectorXd::Zero(n);

  VectorXd& x = out.x;
  Evaluation e = evaluate(problem, x, true, exact);
  MatrixXd bfgs = MatrixXd::Identity(n, n);
  double penalty = 1.0;
  int elastic_streak = 0;
  int penalty_resets = 0;

  auto merit = [&](const Evaluation& ev) { return ev.f + penalty * violation_l1(ev); };
  auto lagrangian_gradient = [&](const Evaluation& ev, const StepModel& m) {
    VectorXd g = ev.grad;
    if (ni) g -= ev.ai.transpose() * m.mu;
    if (ne) g += ev.ae.transpose() * m.lambda;
    return g;
  };

  for (int iter = 0; iter < options.max_iter; ++iter) {
    out.iterations = iter;
    MatrixXd h;
    if (exact) {
      h = e.hess;
      for (Index j = 0; j < ne; ++j) h += out.eq_multipliers(j) * e.he[static_cast<std::size_t>(j)];
      for (Index i = 0; i < ni; ++i) h -= out.ineq_multipliers(i) * e.hi[static_cast<std::size_t>(i)];
    } else {
      h = bfgs;
    }
    MatrixXd hm = convexify(h, options.hessian_floor);
    if (options.ridge > 0.0) hm.diagonal().array() += options.ridge;

    const double elastic_weight = 10.0 * std::max(1.0, penalty);
    StepModel m = solve_subproblem(problem, x, hm, e.grad, e.ae, e.ce, e.ai, e.ci, elastic_weight, true);
    if (!m.ok) {
      out.status = SolveStatus::infeasible;
      break;
    }

    // KKT test at x with the fresh multiplier estimate.
    {
      ScalarSolution probe;
      probe.x = x;
      probe.eq_multipliers = m.lambda;
      probe.ineq_multipliers = m.mu;
      probe.lower_multipliers = m.zl;
      probe.upper_multipliers = m.zu;
      VectorXd stat = lagrangian_gradient(e, m) - m.zl + m.zu;
      const double stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
      const double feas = violation_inf(e);
      double compl_ = 0.0;
      for (Index i = 0; i < ni; ++i) compl_ = std::max(compl_, std::abs(m.mu(i) * e.ci(i)));
      for (Index k = 0; k < n; ++k) {
        if (std::isfinite(problem.lower(k))) compl_ = std::max(compl_, std::abs(m.zl(k) * (x(k) - problem.lower(k))));
        if (std::isfinite(problem.upper(k))) compl_ = std::max(compl_, std::abs(m.zu(k) * (problem.upper(k) - x(k))));
      }
      if (!m.elastic && stationarity <= options.tol_kkt && feas <= options.tol_feas && compl_ <= options.tol_kkt) {
        out.eq_multipliers = m.lambda;
        out.ineq_multipliers = m.mu;
        out.lower_multipliers = m.zl;
        out.upper_multipliers = m.zu;
        out.kkt_residual = stationarity;
        out.constraint_violation = feas;
        out.complementarity = compl_;
        out.status = SolveStatus::converged;
        out.value = e.f;
        return out;
      }
    }

    if (m.elastic) {
      ++elastic_streak;
    } else {
      elastic_streak = 0;
    }
    const double viol = violation_l1(e);
    if (m.elastic && viol > options.tol_feas &&
        (elastic_streak >= 25 || m.d.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>()))) {
      out.status = SolveStatus::infeasible;
      break;
    }

    if (viol > options.tol_feas) {
      // Stationary point of the squared violation: no step can reduce it.
      VectorXd gv = VectorXd::Zero(n);
      if (ne) gv += e.ae.transpose() * e.ce;
      if (ni) gv += e.ai.transpose() * e.ci.cwiseMin(0.0);
      for (Index k = 0; k < n; ++k) {
        if (x(k) <= problem.lower(k) && gv(k) > 0.0) gv(k) = 0.0;
        if (x(k) >= problem.upper(k) && gv(k) < 0.0) gv(k) = 0.0;
      }
      const double sq = ne ? e.ce.squaredNorm() : 0.0;
      const double sqi = ni ? e.ci.cwiseMin(0.0).squaredNorm() : 0.0;
      if (gv.lpNorm<Eigen::Infinity>() <= 1e-7 * (sq + sqi)) {
        out.status = SolveStatus::infeasible;
        break;
      }
    }

    double max_mult = 0.0;
    if (ne) max_mult = std::max(max_mult, m.lambda.cwiseAbs().maxCoeff());
    if (ni) max_mult = std::max(max_mult, m.mu.cwiseAbs().maxCoeff());
    const double required = 2.0 * max_mult + 1e-3;
    if (penalty < 1.1 * max_mult) {
      penalty = required;
    } else if (!m.elastic && viol <= options.tol_feas && penalty > 100.0 * required && penalty_resets < 10) {
      // A penalty sized for the early multipliers can dwarf the objective
      // near a feasible point and force tiny steps along curved constraints.
      penalty = 10.0 * required;
      ++penalty_resets;
    }
    if (penalty > 1e14) {
      out.status = SolveStatus::infeasible;
      break;
    }

    // Directional derivative of the l1 merit along d.
    double linearized_viol = 0.0;
    if (m.elastic) {
      const VectorXd lce = e.ce + e.ae * m.d;
      const VectorXd lci = e.ci + e.ai * m.d;
      linearized_viol = lce.cwiseAbs().sum() + (-lci).cwiseMax(0.0).sum();
    }
    const double phi0 = merit(e);
    double dphi = e.grad.dot(m.d) - penalty * (viol - linearized_viol);
    if (dphi >= 0.0) dphi = -1e-16 * (1.0 + std::abs(phi0));
    const double slack_tol = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi0));

    VectorXd x_new;
    Evaluation e_new;
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = clamp_to_bounds(problem, x + step * m.d);
      e_new = evaluate(problem, x_new, false, false);
      if (merit(e_new) <= phi0 + 1e-4 * step * dphi + slack_tol) {
        accepted = true;
        break;
      }
      if (ls == 0 && (ne + ni) > 0) {
        // Second-order correction against the Maratos effect.
        const VectorXd ce_soc = e_new.ce - e.ae * m.d;
        const VectorXd ci_soc = e_new.ci - e.ai * m.d;
        StepModel soc = solve_subproblem(problem, x, hm, e.grad, e.ae, ce_soc, e.ai, ci_soc, elastic_weight, false);
        if (soc.ok) {
          const VectorXd x_soc = clamp_to_bounds(problem, x + soc.d);
          const Evaluation e_soc = evaluate(problem, x_soc, false, false);
          if (merit(e_soc) <= phi0 + 1e-4 * dphi + slack_tol) {
            x_new = x_soc;
            e_new = e_soc;
            accepted = true;
            break;
          }
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (m.elastic && viol > options.tol_feas) out.status = SolveStatus::infeasible;
      break;
    }

    out.merit_trace.push_back({phi0, merit(e_new), dphi, step});

    Evaluation e_next = evaluate(problem, x_new, true, exact);
    if (!exact) {
      // Damped BFGS (Powell) on the Lagrangian gradient.
      const VectorXd s = x_new - x;
      const VectorXd y = lagrangian_gradient(e_next, m) - lagrangian_gradient(e, m);
      const double sbs = s.dot(bfgs * s);
      if (sbs > 1e-300) {
        double sy = s.dot(y);
        VectorXd yd = y;
        if (sy < 0.2 * sbs) {
          const double theta = 0.8 * sbs / (sbs - sy);
          yd = theta * y + (1.0 - theta) * (bfgs * s);
          sy = s.dot(yd);
        }
        if (sy > 1e-300) {
          const VectorXd bs = bfgs * s;
          bfgs += yd * yd.transpose() / sy - bs * bs.transpose() / sbs;
        }
      }
    }
    x = x_new;
    e = std::move(e_next);
    out.eq_multipliers = m.lambda;
    out.ineq_multipliers = m.mu;
    out.lower_multipliers = m.zl;
    out.upper_multipliers = m.zu;
    // After a truncated step the QP multipliers describe a point the iterate
    // has not reached. The Hessian then uses a first-order estimate at x.
    if (exact && !m.elastic && step < 1.0) least_squares_multipliers(problem, e, out);
  }

  if (out.status == SolveStatus::converged) out.status = SolveStatus::max_iter;
  const KktReport r = kkt_report(problem, out);
  out.kkt_residual = r.stationarity;
  out.constraint_violation = r.feasibility;
  out.complementarity = r.complementarity;
  out.value = e.f;
  return out;
}

MultiStartResult solve_multistart(const NlpProblem& problem, const std::vector<VectorXd>& starts,
                                  const NlpOptions& options, int workers) {
  if (starts.empty()) throw ParameterError("multistart: at least one start is required");
  MultiStartResult result;
  result.locals.resize(starts.size());

  auto run = [&](std::size_t i) {
    NlpProblem local = problem;
    local.x0 = starts[i];
    result.locals[i] = solve(local, options);
  };
  parallel_for(starts.size(), workers, run);

  const ScalarSolution* best = nullptr;
  for (const auto& s : result.locals) {
    if (!s.converged()) continue;
    if (!best || s.value < best->value || (s.value == best->value && lexicographic_less(s.x, best->x))) best = &s;
  }
  if (!best) {
    std::ostringstream msg;
    msg << "multistart: no start converged (";
    for (std::size_t i = 0; i < result.locals.size(); ++i)
      msg << (i ? ", " : "") << "start " << i << ": " << to_string(result.locals[i].status);
    msg << ")";
    throw SolverError(msg.str());
  }
  result.best = *best;
  return result;
}

}  // namespace hmfront
