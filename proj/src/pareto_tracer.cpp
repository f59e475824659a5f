#include "hmfront/pareto_tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hmfront/error.hpp"
#include "hmfront/parallel.hpp"
#include "hmfront/qp.hpp"
#include "hmfront/random.hpp"
#include "hmfront/scalarization.hpp"

namespace hmfront {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kBoundTol = 1e-9;

std::vector<Index> active_bounds(const MultiObjective& mo, const VectorXd& x) {
  std::vector<Index> out;
  for (Index j = 0; j < x.size(); ++j)
    if (x(j) - mo.lower(j) <= kBoundTol || mo.upper(j) - x(j) <= kBoundTol) out.push_back(j);
  return out;
}

// Orthonormal basis of the null space of the equality rows and the frozen
// coordinates; n x 0 when nothing is free.
MatrixXd free_basis(const MultiObjective& mo, const std::vector<Index>& frozen) {
  const Index n = mo.dimension();
  const Index rows = mo.eq_matrix.rows() + Index(frozen.size());
  if (rows == 0) return MatrixXd::Identity(n, n);
  MatrixXd c = MatrixXd::Zero(rows, n);
  c.topRows(mo.eq_matrix.rows()) = mo.eq_matrix;
  for (std::size_t k = 0; k < frozen.size(); ++k) c(mo.eq_matrix.rows() + Index(k), frozen[k]) = 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(c, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = 1e-12 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

// Weights on the unit simplex minimizing |G' alpha|.
VectorXd stationarity_weights(const MatrixXd& g) {
  const Index m = g.rows();
  qp::QpProblem q;
  q.hessian = 2.0 * g * g.transpose();
  q.hessian.diagonal().array() += 1e-14 * std::max(1.0, q.hessian.norm());
  q.linear = VectorXd::Zero(m);
  q.eq_matrix = MatrixXd::Ones(1, m);
  q.eq_rhs = VectorXd::Ones(1);
  q.ineq_matrix = MatrixXd::Identity(m, m);
  q.ineq_rhs = VectorXd::Zero(m);
  const auto r = qp::solve(q);
  if (r.status != qp::QpStatus::optimal) return VectorXd::Constant(m, 1.0 / double(m));
  VectorXd a = r.x.cwiseMax(0.0);
  return a / a.sum();
}

MatrixXd positive_definite(const MatrixXd& h) {
  const MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  VectorXd ev = es.eigenvalues();
  const double floor = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Index i = 0; i < ev.size(); ++i) ev(i) = std::max(std::abs(ev(i)), floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct NewtonStep {
  bool ok = false;
  VectorXd s;
  double t = 0.0;
  VectorXd alpha;
};

NewtonStep descent_step(const MultiObjective& mo, const VectorXd& x, const MatrixXd& jac,
                        const std::vector<MatrixXd>& hess, const NlpOptions& nlp) {
  const Index n = mo.dimension();
  const int m = mo.objectives;
  NlpProblem q;
  q.objective = {[n](const VectorXd& z, VectorXd* g, MatrixXd* h) {
                   if (g) {
                     g->setZero(z.size());
                     (*g)(n) = 1.0;
                   }
                   if (h) h->setZero(z.size(), z.size());
                   return z(n);
                 },
                 true};
  for (int j = 0; j < m; ++j) {
    const VectorXd grad = jac.row(j).transpose();
    const MatrixXd h = positive_definite(hess[std::size_t(j)]);
    q.inequalities.push_back({[n, grad, h](const VectorXd& z, VectorXd* g, MatrixXd* hz) {
                                const auto s = z.head(n);
                                const VectorXd hs = h * s;
                                if (g) {
                                  g->resize(z.size());
                                  g->head(n) = -grad - hs;
                                  (*g)(n) = 1.0;
                                }
                                if (hz) {
                                  hz->setZero(z.size(), z.size());
                                  hz->topLeftCorner(n, n) = -h;
                                }
                                return z(n) - grad.dot(s) - 0.5 * s.dot(hs);
                              },
                              true});
  }
  for (Index r = 0; r < mo.eq_matrix.rows(); ++r) {
    const VectorXd a = mo.eq_matrix.row(r).transpose();
    const double rhs = mo.eq_rhs(r) - a.dot(x);
    q.equalities.push_back({[n, a, rhs](const VectorXd& z, VectorXd* g, MatrixXd* hz) {
                              if (g) {
                                g->setZero(z.size());
                                g->head(n) = a;
                              }
                              if (hz) hz->setZero(z.size(), z.size());
                              return a.dot(z.head(n)) - rhs;
                            },
                            true});
  }
  q.lower.resize(n + 1);
  q.upper.resize(n + 1);
  q.lower.head(n) = mo.lower - x;
  q.upper.head(n) = mo.upper - x;
  q.lower(n) = -std::numeric_limits<double>::infinity();
  q.upper(n) = std::numeric_limits<double>::infinity();
  q.x0 = VectorXd::Zero(n + 1);

  const ScalarSolution sol = solve(q, nlp);
  NewtonStep out;
  if (!sol.converged()) return out;
  out.ok = true;
  out.s = sol.x.head(n);
  out.t = sol.x(n);
  VectorXd a = sol.ineq_multipliers.cwiseMax(0.0);
  out.alpha = a.sum() > 0.0 ? VectorXd(a / a.sum()) : VectorXd::Constant(m, 1.0 / m);
  return out;
}

// Minimum-norm Newton steps on Z' J' alpha = 0, sum(alpha) = 1 with the
// active set held fixed. The subproblem multipliers are only as accurate as
// the inner solver, which leaves a stationarity residual that the tangent
// computation would amplify. Inputs are left alone unless the residual drops
// and the result stays feasible.
void polish_kkt(const MultiObjective& mo, VectorXd& x, VectorXd& alpha) {
  const std::vector<Index> frozen = active_bounds(mo, x);
  const MatrixXd z = free_basis(mo, frozen);
  const Index k = z.cols();
  const int m = mo.objectives;
  if (k == 0) return;
  VectorXd xc = x, ac = alpha;
  double first = -1.0, last = 0.0;
  for (int it = 0; it < 6; ++it) {
    MatrixXd jac;
    std::vector<MatrixXd> hess;
    mo.eval(xc, nullptr, &jac, &hess);
    const MatrixXd jz = jac * z;
    VectorXd rhs(k + 1);
    rhs.head(k) = jz.transpose() * ac;
    rhs(k) = ac.sum() - 1.0;
    last = rhs.lpNorm<Eigen::Infinity>();
    if (first < 0.0) first = last;
    if (last <= 1e-15 * std::max(1.0, jz.cwiseAbs().maxCoeff())) break;
    MatrixXd w = MatrixXd::Zero(xc.size(), xc.size());
    for (int i = 0; i < m; ++i) w += ac(i) * hess[std::size_t(i)];
    MatrixXd kkt = MatrixXd::Zero(k + 1, k + m);
    kkt.topLeftCorner(k, k) = z.transpose() * w * z;
    kkt.topRightCorner(k, m) = jz.transpose();
    kkt.bottomRightCorner(1, m).setOnes();
    const VectorXd step = kkt.completeOrthogonalDecomposition().solve(-rhs);
    const VectorXd xn = xc + z * step.head(k);
    const VectorXd an = ac + step.tail(m);
    for (Index j = 0; j < xn.size(); ++j)
      if (std::find(frozen.begin(), frozen.end(), j) == frozen.end() &&
          (xn(j) < mo.lower(j) || xn(j) > mo.upper(j)))
        return;
    if (an.minCoeff() < -1e-8) return;
    xc = xn;
    ac = an;
  }
  if (!(last < first)) return;
  ac = ac.cwiseMax(0.0);
  x = xc;
  alpha = ac / ac.sum();
}

// Largest step in [0, t] along v from x that respects the bounds.
double bounded_step(const MultiObjective& mo, const VectorXd& x, const VectorXd& v, double t) {
  double out = t;
  for (Index j = 0; j < x.size(); ++j) {
    if (v(j) < 0.0 && std::isfinite(mo.lower(j))) out = std::min(out, (x(j) - mo.lower(j)) / -v(j));
    if (v(j) > 0.0 && std::isfinite(mo.upper(j))) out = std::min(out, (mo.upper(j) - x(j)) / v(j));
  }
  return std::max(out, 0.0);
}

// Moves from x a path length t along v. When a bound blocks the move, the
// rest of the length continues along v projected onto the face reached,
// rescaled to the same image-space speed under `jac`.
struct FacePath {
  VectorXd x;
  double length = 0.0;
  bool clipped = false;
};

FacePath advance(const MultiObjective& mo, const MatrixXd& jac, const VectorXd& x, const VectorXd& v, double t) {
  FacePath out{x, 0.0, false};
  const double speed = (jac * v).norm();
  VectorXd dir = v;
  for (Index pass = 0; pass <= x.size(); ++pass) {
    const double step = bounded_step(mo, out.x, dir, t - out.length);
    out.x += step * dir;
    out.length += step;
    if (t - out.length <= 1e-12 * t) break;
    out.clipped = true;
    out.x = out.x.cwiseMax(mo.lower).cwiseMin(mo.upper);
    const std::vector<Index> frozen = active_bounds(mo, out.x);
    const MatrixXd z = free_basis(mo, frozen);
    if (z.cols() == 0) break;
    dir = z * (z.transpose() * dir);
    for (Index j : frozen) dir(j) = 0.0;
    const double face_speed = (jac * dir).norm();
    if (face_speed <= 1e-12 * speed) break;
    dir *= speed / face_speed;
  }
  return out;
}

}  // namespace

MultiObjective portfolio_objectives(const PortfolioMop& problem) {
  const Index n = problem.assets();
  MultiObjective mo;
  mo.objectives = problem.objective_count();
  mo.eval = [&problem](const VectorXd& x, VectorXd* value, MatrixXd* jac, std::vector<MatrixXd>* hess) {
    if (hess) {
      MopDerivatives d = problem.derivatives(x);
      if (value) *value = std::move(d.value);
      if (jac) *jac = std::move(d.jacobian);
      *hess = std::move(d.hessians);
      return;
    }
    if (value) *value = problem.evaluate(x);
    if (jac) *jac = problem.jacobian(x);
  };
  mo.eq_matrix = MatrixXd::Ones(1, n);
  mo.eq_rhs = VectorXd::Ones(1);
  mo.lower = problem.lower_bounds();
  mo.upper = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  return mo;
}

KktPoint make_kkt_point(const MultiObjective& mo, const VectorXd& x, const VectorXd* alpha) {
  KktPoint p;
  p.x = x;
  std::vector<MatrixXd> hess;
  mo.eval(x, &p.image, &p.jacobian, &hess);
  p.frozen = active_bounds(mo, x);
  const MatrixXd z = free_basis(mo, p.frozen);
  const MatrixXd reduced = p.jacobian * z;
  p.alpha = alpha ? *alpha : stationarity_weights(reduced);
  p.weighted_hessian = MatrixXd::Zero(x.size(), x.size());
  for (int i = 0; i < mo.objectives; ++i) p.weighted_hessian += p.alpha(i) * hess[std::size_t(i)];
  const VectorXd r = reduced.transpose() * p.alpha;
  p.kkt_residual = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
  return p;
}

TangentFrame tangent_frame(const MultiObjective& mo, const KktPoint& point) {
  TangentFrame f;
  const int m = mo.objectives;
  const MatrixXd z = free_basis(mo, point.frozen);
  if (z.cols() == 0) {
    f.message = "no free directions";
    return f;
  }
  const MatrixXd jz = point.jacobian * z;
  MatrixXd wz = z.transpose() * point.weighted_hessian * z;
  wz = 0.5 * (wz + wz.transpose());

  Eigen::FullPivLU<MatrixXd> lu(wz);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) {
    const double ridge = 1e-8 * std::max(wz.norm(), 1e-300);
    wz.diagonal().array() += ridge;
    lu.compute(wz);
    if (!lu.isInvertible() || lu.rcond() < 1e-14) {
      f.message = "weighted Hessian is singular";
      return f;
    }
  }
  const MatrixXd winv_jt = lu.solve(jz.transpose());  // r x m
  const MatrixXd mmat = jz * winv_jt;                 // m x m

  MatrixXd aug(m, m + 1);
  aug.col(0) = point.alpha;
  aug.rightCols(m) = mmat;
  Eigen::HouseholderQR<MatrixXd> qr(aug);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(m, m);
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < m; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);

  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(mmat);
  for (int i = 1; i < m; ++i) {
    const VectorXd d = q.col(i);
    const VectorXd mu = cod.solve(-d);
    VectorXd nu = -z * (winv_jt * mu);
    // Round-off in Z leaves tiny components on frozen coordinates, which
    // would otherwise block the predictor at its own bound.
    for (Index j : point.frozen) nu(j) = 0.0;
    f.directions.push_back(d);
    f.mu.push_back(mu);
    f.nu.push_back(nu);
  }
  f.ok = true;
  return f;
}

std::vector<Prediction> predictor(const MultiObjective& mo, const KktPoint& point, const TangentFrame& frame,
                                  double tau) {
  if (!(tau > 0.0)) throw ParameterError("tracer: tau must be positive");
  std::vector<Prediction> out;
  if (!frame.ok) return out;
  for (std::size_t i = 0; i < frame.nu.size(); ++i) {
    const VectorXd& nu = frame.nu[i];
    const double speed = (point.jacobian * nu).norm();
    if (speed < 1e-12) continue;
    const double t = tau / speed;
    for (int sign : {1, -1}) {
      const VectorXd v = double(sign) * nu;
      const FacePath path = advance(mo, point.jacobian, point.x, v, t);
      if (path.length <= 1e-12 * t) continue;
      Prediction p;
      p.x = path.x;
      p.velocity = v;
      p.length = path.length;
      p.direction = int(i);
      p.sign = sign;
      p.step = t;
      p.clipped = path.clipped;
      out.push_back(std::move(p));
    }
  }
  return out;
}

CorrectorResult corrector(const MultiObjective& mo, const VectorXd& start, double tol, int max_iter,
                          const NlpOptions& nlp) {
  if (start.size() != mo.dimension()) throw ShapeError("corrector: start has the wrong length");
  CorrectorResult out;
  VectorXd x = start.cwiseMax(mo.lower).cwiseMin(mo.upper);
  constexpr double kArmijo = 1e-4;

  // Objectives are rescaled to unit gradient norm at the start, so t measures
  // criticality on comparable scales even when the moments differ by orders
  // of magnitude.
  VectorXd scale;
  {
    MatrixXd jac;
    mo.eval(x, nullptr, &jac, nullptr);
    const VectorXd norms = jac.rowwise().norm();
    const double floor = std::max(1e-6 * norms.maxCoeff(), 1e-300);
    scale = norms.cwiseMax(floor).cwiseInverse();
  }

  int extra = 3;
  VectorXd alpha;
  for (int it = 0; it < max_iter; ++it) {
    VectorXd f;
    MatrixXd jac;
    std::vector<MatrixXd> hess;
    mo.eval(x, &f, &jac, &hess);
    jac = scale.asDiagonal() * jac;
    for (int i = 0; i < mo.objectives; ++i) hess[std::size_t(i)] *= scale(i);
    const NewtonStep st = descent_step(mo, x, jac, hess, nlp);
    out.iterations = it + 1;
    if (!st.ok) {
      if (out.accepted) break;
      out.message = "corrector subproblem did not converge";
      return out;
    }
    if (st.t >= -tol) {
      // Newton converges quadratically near a critical point; a few more
      // steps make the multipliers accurate enough for the tangent space.
      if (!out.accepted || st.t >= out.point.criticality) {
        alpha = scale.cwiseProduct(st.alpha);
        alpha /= alpha.sum();
        out.point.x = x;
        out.point.criticality = st.t;
        out.accepted = true;
      }
      if (extra-- == 0 || st.t == 0.0) break;
    } else if (out.accepted) {
      break;
    }
    double eta = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      const VectorXd trial = (x + eta * st.s).cwiseMax(mo.lower).cwiseMin(mo.upper);
      VectorXd ft;
      mo.eval(trial, &ft, nullptr, nullptr);
      if (((ft - f).cwiseProduct(scale).array() <= kArmijo * eta * st.t).all()) {
        x = trial;
        moved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!moved) {
      if (out.accepted) break;
      out.message = "corrector stalled: no acceptable step";
      return out;
    }
  }
  if (!out.accepted) {
    out.message = "corrector reached the iteration limit";
    return out;
  }
  x = out.point.x;
  const double t = out.point.criticality;
  polish_kkt(mo, x, alpha);
  out.point = make_kkt_point(mo, x, &alpha);
  out.point.criticality = t;
  return out;
}

FrontApproximation trace(const MultiObjective& mo, const std::vector<VectorXd>& seeds, const TracerConfig& config) {
  if (!(config.tau > 0.0) || !std::isfinite(config.tau)) throw ParameterError("tracer: tau must be positive");
  if (config.n_starts < 1) throw ParameterError("tracer: n_starts must be at least 1");
  if (config.max_points < 1) throw ParameterError("tracer: max_points must be at least 1");
  if (seeds.empty()) throw ParameterError("tracer: no seed points");

  FrontApproximation out;
  out.tau = config.tau;
  std::vector<TracedPoint> archive;
  const double radius = 0.5 * config.tau;
  auto duplicate = [&](const VectorXd& image) {
    for (const auto& p : archive)
      if ((p.point.image - image).norm() < radius) return true;
    return false;
  };
  auto correct = [&](const VectorXd& x) {
    return corrector(mo, x, config.corrector_tol, config.corrector_max_iter, config.nlp);
  };

  std::vector<CorrectorResult> seeded(seeds.size());
  parallel_for(seeds.size(), config.workers, [&](std::size_t i) { seeded[i] = correct(seeds[i]); });
  std::vector<std::size_t> frontier;
  for (auto& s : seeded) {
    if (!s.accepted) {
      ++out.rejected;
      continue;
    }
    ++out.seeds_converged;
    if (archive.size() >= std::size_t(config.max_points)) continue;
    if (duplicate(s.point.image)) {
      ++out.duplicates;
      continue;
    }
    frontier.push_back(archive.size());
    archive.push_back({std::move(s.point), -1});
  }
  if (out.seeds_converged == 0) throw SolverError("tracer: no seed point could be corrected");

  struct Task {
    std::size_t parent;
    Prediction prediction;
  };
  while (!frontier.empty() && archive.size() < std::size_t(config.max_points)) {
    std::vector<Task> tasks;
    for (std::size_t idx : frontier) {
      const TangentFrame frame = tangent_frame(mo, archive[idx].point);
      for (auto& p : predictor(mo, archive[idx].point, frame, config.tau)) tasks.push_back({idx, std::move(p)});
    }
    std::vector<CorrectorResult> results(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t i) {
      const Prediction& p = tasks[i].prediction;
      const KktPoint& origin = archive[tasks[i].parent].point;
      results[i] = correct(p.x);
      double length = p.length;
      for (int retry = 0; retry < 4 && results[i].accepted; ++retry) {
        if ((results[i].point.image - origin.image).norm() <= 2.0 * config.tau) break;
        length *= 0.5;
        results[i] = correct(advance(mo, origin.jacobian, origin.x, p.velocity, length).x);
      }
    });

    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      ++out.predictions;
      if (tasks[i].prediction.clipped) ++out.clipped;
      if (!results[i].accepted) {
        ++out.rejected;
        continue;
      }
      if (archive.size() >= std::size_t(config.max_points)) break;
      if (duplicate(results[i].point.image)) {
        ++out.duplicates;
        continue;
      }
      next.push_back(archive.size());
      archive.push_back({std::move(results[i].point), long(tasks[i].parent)});
    }
    frontier = std::move(next);
  }

  std::vector<std::size_t> order(archive.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const VectorXd& fa = archive[a].point.image;
    const VectorXd& fb = archive[b].point.image;
    return std::lexicographical_compare(fa.data(), fa.data() + fa.size(), fb.data(), fb.data() + fb.size());
  });
  std::vector<long> where(archive.size());
  for (std::size_t k = 0; k < order.size(); ++k) where[order[k]] = long(k);
  out.points.reserve(archive.size());
  for (std::size_t k : order) {
    TracedPoint p = std::move(archive[k]);
    if (p.parent >= 0) p.parent = where[std::size_t(p.parent)];
    out.points.push_back(std::move(p));
  }
  return out;
}

double default_tau(const PortfolioMop& problem, const NlpOptions& nlp) {
  ScalarizationOptions opt;
  opt.nlp = nlp;
  const Anchors an = compute_anchors(problem, opt);
  double diameter = 0.0;
  for (Index i = 0; i < an.phi.cols(); ++i)
    for (Index j = i + 1; j < an.phi.cols(); ++j) diameter = std::max(diameter, (an.phi.col(i) - an.phi.col(j)).norm());
  if (!(diameter > 0.0)) throw SolverError("tracer: the anchor images coincide, no default tau");
  return 0.01 * diameter;
}

FrontApproximation trace(const PortfolioMop& problem, const TracerConfig& config) {
  TracerConfig cfg = config;
  if (cfg.tau == 0.0) cfg.tau = default_tau(problem, cfg.nlp);
  if (cfg.n_starts < 1) throw ParameterError("tracer: n_starts must be at least 1");
  const MultiObjective mo = portfolio_objectives(problem);
  return trace(mo, dirichlet_samples(problem.assets(), cfg.n_starts, cfg.seed), cfg);
}

}  // namespace hmfront
