#include "hmfront/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "hmfront/error.hpp"

namespace hmfront::qp {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Working state of the dual method. J holds L^{-T} Q where G = L L' and the
// active constraint normals N satisfy L^{-1} N = Q [R; 0].
struct ActiveSet {
  MatrixXd J;
  MatrixXd R;
  VectorXd u;
  std::vector<Index> active;  // constraint ids: -(i+1) for equality i, i for inequality i
  Index size = 0;
  double r_norm = 1.0;
};

// z = J2 d2, the primal step direction in the null space of the active set.
VectorXd step_direction(const ActiveSet& s, const VectorXd& d) {
  const Index n = d.size();
  return s.J.rightCols(n - s.size) * d.tail(n - s.size);
}

// r = R^{-1} d1, the change of the active multipliers.
VectorXd multiplier_direction(const ActiveSet& s, const VectorXd& d) {
  VectorXd r(s.size);
  for (Index i = s.size - 1; i >= 0; --i) {
    double sum = 0.0;
    for (Index j = i + 1; j < s.size; ++j) sum += s.R(i, j) * r(j);
    r(i) = (d(i) - sum) / s.R(i, i);
  }
  return r;
}

bool add_constraint(ActiveSet& s, VectorXd& d) {
  const Index n = d.size();
  for (Index j = n - 1; j > s.size; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Index k = 0; k < n; ++k) {
      const double t1 = s.J(k, j - 1);
      const double t2 = s.J(k, j);
      s.J(k, j - 1) = t1 * cc + t2 * ss;
      s.J(k, j) = xny * (t1 + s.J(k, j - 1)) - t2;
    }
  }
  ++s.size;
  for (Index i = 0; i < s.size; ++i) s.R(i, s.size - 1) = d(i);
  if (std::abs(d(s.size - 1)) <= kEps * s.r_norm) return false;
  s.r_norm = std::max(s.r_norm, std::abs(d(s.size - 1)));
  return true;
}

void delete_constraint(ActiveSet& s, Index n_eq, Index id) {
  const Index n = s.J.rows();
  Index qq = -1;
  for (Index i = n_eq; i < s.size; ++i)
    if (s.active[static_cast<std::size_t>(i)] == id) {
      qq = i;
      break;
    }
  if (qq < 0) return;

  for (Index i = qq; i < s.size - 1; ++i) {
    s.active[static_cast<std::size_t>(i)] = s.active[static_cast<std::size_t>(i + 1)];
    s.u(i) = s.u(i + 1);
    s.R.col(i) = s.R.col(i + 1);
  }
  s.active[static_cast<std::size_t>(s.size - 1)] = s.active[static_cast<std::size_t>(s.size)];
  s.u(s.size - 1) = s.u(s.size);
  s.active[static_cast<std::size_t>(s.size)] = 0;
  s.u(s.size) = 0.0;
  s.R.col(s.size - 1).head(s.size).setZero();
  --s.size;
  if (s.size == 0) return;

  for (Index j = qq; j < s.size; ++j) {
    double cc = s.R(j, j);
    double ss = s.R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    s.R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      s.R(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      s.R(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Index k = j + 1; k < s.size; ++k) {
      const double t1 = s.R(j, k);
      const double t2 = s.R(j + 1, k);
      s.R(j, k) = t1 * cc + t2 * ss;
      s.R(j + 1, k) = xny * (t1 + s.R(j, k)) - t2;
    }
    for (Index k = 0; k < n; ++k) {
      const double t1 = s.J(k, j);
      const double t2 = s.J(k, j + 1);
      s.J(k, j) = t1 * cc + t2 * ss;
      s.J(k, j + 1) = xny * (s.J(k, j) + t1) - t2;
    }
  }
}


// The dual iteration starts from the unconstrained minimizer, which can be
// far away when the Hessian has tiny eigenvalues in directions that the
// active constraints later pin down; the cancellation then costs accuracy.
// Re-solving the KKT system of the final active set recovers it. The polished
// point is kept only if it stays primal and dual feasible.
void polish(const QpProblem& problem, ActiveSet& s, VectorXd& x) {
  const Index n = x.size();
  const Index p = problem.eq_matrix.rows();
  const Index k = s.size;
  MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
  VectorXd rhs(n + k);
  kkt.topLeftCorner(n, n) = problem.hessian;
  rhs.head(n) = -problem.linear;
  for (Index i = 0; i < k; ++i) {
    const Index id = s.active[static_cast<std::size_t>(i)];
    const VectorXd row = id < 0 ? VectorXd(problem.eq_matrix.row(-id - 1).transpose())
                                : VectorXd(problem.ineq_matrix.row(id).transpose());
    kkt.block(0, n + i, n, 1) = -row;
    kkt.block(n + i, 0, 1, n) = row.transpose();
    rhs(n + i) = id < 0 ? problem.eq_rhs(-id - 1) : problem.ineq_rhs(id);
  }
  const Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (lu.rank() < n + k) return;
  const VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return;
  const VectorXd xp = sol.head(n);
  const double scale = 1.0 + xp.cwiseAbs().maxCoeff();
  for (Index j = 0; j < problem.ineq_matrix.rows(); ++j) {
    const double slack = problem.ineq_matrix.row(j).dot(xp) - problem.ineq_rhs(j);
    if (slack < -1e-12 * scale * (1.0 + std::abs(problem.ineq_rhs(j)))) return;
  }
  const double umax = 1.0 + sol.tail(k).cwiseAbs().maxCoeff();
  for (Index i = p; i < k; ++i)
    if (sol(n + i) < -1e-10 * umax) return;
  x = xp;
  for (Index i = 0; i < k; ++i) s.u(i) = i < p ? sol(n + i) : std::max(0.0, sol(n + i));
}

}  // namespace

QpResult solve(const QpProblem& problem) {
  const Index n = problem.hessian.rows();
  const Index p = problem.eq_matrix.rows();
  const Index m = problem.ineq_matrix.rows();
  if (problem.hessian.cols() != n || problem.linear.size() != n ||
      (p > 0 && problem.eq_matrix.cols() != n) || problem.eq_rhs.size() != p ||
      (m > 0 && problem.ineq_matrix.cols() != n) || problem.ineq_rhs.size() != m)
    throw ShapeError("qp: inconsistent problem dimensions");

  QpResult result;
  result.eq_multipliers = VectorXd::Zero(p);
  result.ineq_multipliers = VectorXd::Zero(m);

  const Eigen::LLT<MatrixXd> llt(problem.hessian);
  if (llt.info() != Eigen::Success) {
    result.status = QpStatus::not_convex;
    result.x = VectorXd::Zero(n);
    return result;
  }
  const double c1 = problem.hessian.trace();

  ActiveSet s;
  s.J = llt.matrixU().solve(MatrixXd::Identity(n, n));
  s.R = MatrixXd::Zero(n, n);
  s.u = VectorXd::Zero(n + 1);
  s.active.assign(static_cast<std::size_t>(n + 1), 0);
  const double c2 = s.J.trace();

  // Constraint k as normal'x + offset (= 0 or >= 0).
  auto normal = [&](Index k) -> VectorXd {
    return k < 0 ? VectorXd(problem.eq_matrix.row(-k - 1).transpose()) : VectorXd(problem.ineq_matrix.row(k).transpose());
  };
  auto offset = [&](Index k) { return k < 0 ? -problem.eq_rhs(-k - 1) : -problem.ineq_rhs(k); };

  VectorXd x = -llt.solve(problem.linear);
  double f = 0.5 * problem.linear.dot(x);

  auto finish = [&](QpStatus status) {
    if (status == QpStatus::optimal) polish(problem, s, x);
    result.status = status;
    result.x = x;
    result.value = 0.5 * x.dot(problem.hessian * x) + problem.linear.dot(x);
    for (Index i = 0; i < s.size; ++i) {
      const Index k = s.active[static_cast<std::size_t>(i)];
      if (k < 0)
        result.eq_multipliers(-k - 1) = s.u(i);
      else
        result.ineq_multipliers(k) = s.u(i);
    }
    return result;
  };

  for (Index i = 0; i < p; ++i) {
    const VectorXd np = normal(-i - 1);
    VectorXd d = s.J.transpose() * np;
    const VectorXd z = step_direction(s, d);
    const VectorXd r = multiplier_direction(s, d);
    double t2 = 0.0;
    if (std::abs(z.dot(z)) > kEps) t2 = (-np.dot(x) - offset(-i - 1)) / z.dot(np);
    x += t2 * z;
    s.u(s.size) = t2;
    s.u.head(s.size) -= t2 * r;
    f += 0.5 * t2 * t2 * z.dot(np);
    s.active[static_cast<std::size_t>(i)] = -i - 1;
    if (!add_constraint(s, d)) return finish(QpStatus::dependent_equalities);
  }

  // iai(k) >= 0 marks inequality k as a candidate for entering the active set.
  std::vector<Index> iai(static_cast<std::size_t>(m));
  std::vector<bool> excluded(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) iai[static_cast<std::size_t>(k)] = k;
  VectorXd slack(m);
  // Violations below this size are roundoff, e.g. a bound that an equality
  // system pins exactly, and are not worth a pivot.
  VectorXd tol(m);
  for (Index k = 0; k < m; ++k)
    tol(k) = 1e-13 * (1.0 + std::abs(problem.ineq_rhs(k)) + problem.ineq_matrix.row(k).cwiseAbs().maxCoeff());
  VectorXd u_old(n + 1);
  std::vector<Index> active_old;
  VectorXd x_old;

  const int max_outer = static_cast<int>(50 * (n + m + 10));
  for (int outer = 0; outer < max_outer; ++outer) {
    for (Index i = p; i < s.size; ++i) iai[static_cast<std::size_t>(s.active[static_cast<std::size_t>(i)])] = -1;

    double psi = 0.0;
    for (Index k = 0; k < m; ++k) {
      excluded[static_cast<std::size_t>(k)] = false;
      slack(k) = problem.ineq_matrix.row(k).dot(x) + offset(k);
      if (slack(k) < -tol(k) * (1.0 + x.cwiseAbs().maxCoeff())) psi += slack(k);
    }
    if (std::abs(psi) <= static_cast<double>(m) * kEps * c1 * c2 * 100.0) return finish(QpStatus::optimal);

    u_old = s.u;
    active_old = s.active;
    x_old = x;

  choose_violated:
    Index ip = -1;
    double ss = 0.0;
    for (Index k = 0; k < m; ++k)
      if (slack(k) < ss && slack(k) < -tol(k) * (1.0 + x.cwiseAbs().maxCoeff()) &&
          iai[static_cast<std::size_t>(k)] != -1 && !excluded[static_cast<std::size_t>(k)]) {
        ss = slack(k);
        ip = k;
      }
    if (ss >= 0.0 || ip < 0) return finish(QpStatus::optimal);

    const VectorXd np = normal(ip);
    s.u(s.size) = 0.0;
    s.active[static_cast<std::size_t>(s.size)] = ip;

    for (int inner = 0; inner < max_outer; ++inner) {
      VectorXd d = s.J.transpose() * np;
      const VectorXd z = step_direction(s, d);
      const VectorXd r = multiplier_direction(s, d);

      Index leaving = -1;
      double t1 = kInf;
      for (Index k = p; k < s.size; ++k)
        if (r(k) > 0.0 && s.u(k) / r(k) < t1) {
          t1 = s.u(k) / r(k);
          leaving = s.active[static_cast<std::size_t>(k)];
        }
      const double t2 = std::abs(z.dot(z)) > kEps ? -slack(ip) / z.dot(np) : kInf;
      const double t = std::min(t1, t2);

      if (t >= kInf) return finish(QpStatus::infeasible);

      if (t2 >= kInf) {
        s.u.head(s.size) -= t * r;
        s.u(s.size) += t;
        iai[static_cast<std::size_t>(leaving)] = leaving;
        delete_constraint(s, p, leaving);
        continue;
      }

      x += t * z;
      f += t * z.dot(np) * (0.5 * t + s.u(s.size));
      s.u.head(s.size) -= t * r;
      s.u(s.size) += t;

      if (std::abs(t - t2) < kEps) {
        if (!add_constraint(s, d)) {
          excluded[static_cast<std::size_t>(ip)] = true;
          delete_constraint(s, p, ip);
          for (Index k = 0; k < m; ++k) iai[static_cast<std::size_t>(k)] = k;
          s.u = u_old;
          s.active = active_old;
          for (Index i = p; i < s.size; ++i) iai[static_cast<std::size_t>(s.active[static_cast<std::size_t>(i)])] = -1;
          x = x_old;
          goto choose_violated;
        }
        iai[static_cast<std::size_t>(ip)] = -1;
        break;
      }

      iai[static_cast<std::size_t>(leaving)] = leaving;
      delete_constraint(s, p, leaving);
      slack(ip) = np.dot(x) + offset(ip);
    }
  }
  return finish(QpStatus::infeasible);
}

}  // namespace hmfront::qp
