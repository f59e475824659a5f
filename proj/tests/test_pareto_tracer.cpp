#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "hmfront/error.hpp"
#include "hmfront/pareto_tracer.hpp"
#include "hmfront/synthetic.hpp"
#include "test_support.hpp"

using namespace hmfront;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace ts = testing_support;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// f1 = |x - a|^2, f2 = |x - b|^2 on R^n without constraints.
MultiObjective two_quadratics(const VectorXd& a, const VectorXd& b) {
  MultiObjective mo;
  mo.objectives = 2;
  mo.eval = [a, b](const VectorXd& x, VectorXd* f, MatrixXd* j, std::vector<MatrixXd>* h) {
    if (f) *f = (VectorXd(2) << (x - a).squaredNorm(), (x - b).squaredNorm()).finished();
    if (j) {
      j->resize(2, x.size());
      j->row(0) = 2.0 * (x - a).transpose();
      j->row(1) = 2.0 * (x - b).transpose();
    }
    if (h) h->assign(2, 2.0 * MatrixXd::Identity(x.size(), x.size()));
  };
  mo.eq_matrix = MatrixXd(0, a.size());
  mo.eq_rhs = VectorXd(0);
  mo.lower = VectorXd::Constant(a.size(), -kInf);
  mo.upper = VectorXd::Constant(a.size(), kInf);
  return mo;
}

double distance_to_segment(const VectorXd& x, const VectorXd& a, const VectorXd& b) {
  const double s = std::clamp((x - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
  return (x - (a + s * (b - a))).norm();
}

PortfolioMop synthetic_mop(std::vector<Objective> objectives) {
  return PortfolioMop(compute_moments(synthetic_returns(3, 250, 7, 0.3)), std::move(objectives));
}

const std::vector<Objective> kMeanVar{Objective::mean, Objective::variance};

/// Smallest variance of a long-only portfolio with the given mean, by
/// enumerating supports of the two-equality KKT system.
double min_variance_at_mean(const MatrixXd& sigma, const VectorXd& mu, double target) {
  const int n = int(mu.size());
  double best = kInf;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (mask & (1 << j)) idx.push_back(j);
    const int k = int(idx.size());
    MatrixXd kkt = MatrixXd::Zero(k + 2, k + 2);
    VectorXd rhs = VectorXd::Zero(k + 2);
    for (int p = 0; p < k; ++p) {
      for (int q = 0; q < k; ++q) kkt(p, q) = 2.0 * sigma(idx[p], idx[q]);
      kkt(p, k) = kkt(k, p) = 1.0;
      kkt(p, k + 1) = kkt(k + 1, p) = mu(idx[p]);
    }
    rhs(k) = 1.0;
    rhs(k + 1) = target;
    const VectorXd sol = kkt.fullPivLu().solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-9) continue;
    VectorXd w = VectorXd::Zero(n);
    bool ok = true;
    for (int p = 0; p < k; ++p) {
      if (sol(p) < -1e-12) ok = false;
      w(idx[p]) = sol(p);
    }
    if (ok) best = std::min(best, w.dot(sigma * w));
  }
  return best;
}

}  // namespace

TEST_CASE("tangent of two quadratics follows the segment", "[tracer][frame]") {
  const VectorXd a = (VectorXd(3) << 0.0, 1.0, -1.0).finished();
  const VectorXd b = (VectorXd(3) << 2.0, -1.0, 0.5).finished();
  const MultiObjective mo = two_quadratics(a, b);
  const VectorXd x = a + 0.3 * (b - a);
  const VectorXd alpha = (VectorXd(2) << 0.7, 0.3).finished();
  const KktPoint p = make_kkt_point(mo, x, &alpha);
  CHECK(p.kkt_residual <= 1e-12);

  const TangentFrame f = tangent_frame(mo, p);
  REQUIRE(f.ok);
  REQUIRE(f.directions.size() == 1);
  CHECK(std::abs(f.directions[0].norm() - 1.0) <= 1e-12);
  CHECK(std::abs(f.directions[0].dot(alpha)) <= 1e-12);
  const VectorXd u = (b - a).normalized();
  CHECK(std::abs(std::abs(f.nu[0].normalized().dot(u)) - 1.0) <= 1e-10);
  CHECK((p.jacobian * f.nu[0] - f.directions[0]).norm() <= 1e-9);

  // Without given weights the stationarity weights are recovered.
  const KktPoint q = make_kkt_point(mo, x);
  CHECK((q.alpha - alpha).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("mean-variance frame reproduces its directions", "[tracer][frame]") {
  const PortfolioMop mop = synthetic_mop(kMeanVar);
  const MultiObjective mo = portfolio_objectives(mop);
  const auto c = corrector(mo, mop.equal_weights(), 1e-10);
  REQUIRE(c.accepted);
  const TangentFrame f = tangent_frame(mo, c.point);
  REQUIRE(f.ok);
  REQUIRE(f.directions.size() == 1);
  CHECK((c.point.jacobian * f.nu[0] - f.directions[0]).norm() <= 1e-9);
  CHECK(std::abs(f.nu[0].sum()) <= 1e-12);
  CHECK(std::abs(c.point.alpha.sum() - 1.0) <= 1e-12);
}

TEST_CASE("three-objective frame is orthonormal", "[tracer][frame]") {
  const PortfolioMop mop = synthetic_mop({Objective::mean, Objective::variance, Objective::skewness});
  const MultiObjective mo = portfolio_objectives(mop);
  const auto c = corrector(mo, (VectorXd(3) << 0.3, 0.3, 0.4).finished(), 1e-10);
  REQUIRE(c.accepted);
  const TangentFrame f = tangent_frame(mo, c.point);
  REQUIRE(f.ok);
  REQUIRE(f.directions.size() == 2);
  CHECK(std::abs(f.directions[0].dot(f.directions[1])) <= 1e-10);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(f.directions[i].norm() - 1.0) <= 1e-10);
    CHECK(std::abs(f.directions[i].dot(c.point.alpha)) <= 1e-10);
    CHECK(std::abs(f.nu[i].sum()) <= 1e-12);
  }
}

TEST_CASE("predictor steps", "[tracer][predictor]") {
  const VectorXd a = VectorXd::Zero(2);
  const VectorXd b = (VectorXd(2) << 1.0, 0.0).finished();
  MultiObjective mo = two_quadratics(a, b);
  const VectorXd x = (VectorXd(2) << 0.5, 0.0).finished();
  const VectorXd alpha = VectorXd::Constant(2, 0.5);
  const KktPoint p = make_kkt_point(mo, x, &alpha);
  TangentFrame f = tangent_frame(mo, p);
  REQUIRE(f.ok);

  SECTION("t = tau / |J nu|") {
    f.nu[0] *= 2.0 / (p.jacobian * f.nu[0]).norm();
    const auto preds = predictor(mo, p, f, 0.1);
    REQUIRE(preds.size() == 2);
    for (const auto& pr : preds) {
      CHECK(pr.step == Catch::Approx(0.05).epsilon(1e-14));
      CHECK_FALSE(pr.clipped);
      CHECK(((pr.x - x).norm()) == Catch::Approx(0.05 * f.nu[0].norm()).epsilon(1e-12));
    }
    CHECK(preds[0].sign == 1);
    CHECK(preds[1].sign == -1);
  }
  SECTION("bound in the way") {
    mo.lower(0) = 0.49;
    const auto preds = predictor(mo, p, f, 0.1);
    int clipped = 0;
    for (const auto& pr : preds) {
      CHECK(pr.x(0) >= mo.lower(0));
      if (pr.clipped) {
        ++clipped;
        CHECK(pr.x(0) == Catch::Approx(0.49).margin(1e-15));
      }
    }
    CHECK(clipped == 1);
  }
  SECTION("flat direction is skipped") {
    f.nu[0].setZero();
    CHECK(predictor(mo, p, f, 0.1).empty());
  }
  CHECK_THROWS_AS(predictor(mo, p, f, 0.0), ParameterError);
}

TEST_CASE("corrector on two quadratics", "[tracer][corrector]") {
  const VectorXd a = (VectorXd(3) << 1.0, 0.0, 0.0).finished();
  const VectorXd b = (VectorXd(3) << 0.0, 2.0, 1.0).finished();
  const MultiObjective mo = two_quadratics(a, b);

  SECTION("critical start returns at once") {
    const VectorXd x = a + 0.4 * (b - a);
    const auto c = corrector(mo, x, 1e-10);
    REQUIRE(c.accepted);
    CHECK(c.iterations == 1);
    CHECK(std::abs(c.point.criticality) <= 1e-10);
    CHECK((c.point.x - x).norm() == 0.0);
  }
  SECTION("off-segment start converges to the segment") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 0.05);
    for (int rep = 0; rep < 10; ++rep) {
      VectorXd x = a + (0.1 + 0.08 * rep) * (b - a);
      for (int j = 0; j < 3; ++j) x(j) += nd(rng);
      const auto c = corrector(mo, x, 1e-12);
      REQUIRE(c.accepted);
      CHECK(c.iterations <= 10);
      CHECK(distance_to_segment(c.point.x, a, b) <= 1e-8);
      CHECK(c.point.criticality >= -1e-12);
    }
  }
}

TEST_CASE("corrector from dominated portfolios", "[tracer][corrector]") {
  const PortfolioMop mop = synthetic_mop({Objective::mean, Objective::variance, Objective::skewness});
  const MultiObjective mo = portfolio_objectives(mop);
  std::vector<VectorXd> sweep;
  for (const auto& w : ts::simplex_grid3(100)) sweep.push_back(mop.evaluate(w));
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 8; ++rep) {
    const VectorXd w = ts::random_simplex_point(3, rng);
    const auto c = corrector(mo, w, 1e-9);
    REQUIRE(c.accepted);
    CHECK(c.point.criticality >= -1e-9);
    CHECK((c.point.image.array() <= mop.evaluate(w).array() + 1e-12).all());
    for (const auto& f : sweep) CHECK_FALSE(ts::strictly_dominates(f, c.point.image, 1e-10));
  }
}

TEST_CASE("mean-variance trace lies on the analytic frontier", "[tracer][trace]") {
  const PortfolioMop mop = synthetic_mop(kMeanVar);
  TracerConfig cfg;
  cfg.tau = default_tau(mop);
  const FrontApproximation fr = trace(mop, cfg);
  REQUIRE(fr.points.size() > 20);
  const MatrixXd& sigma = mop.moments().sigma();
  const VectorXd& mu = mop.moments().mu();
  for (const auto& p : fr.points) {
    const double mean = -p.point.image(0);
    CHECK(std::abs(p.point.image(1) - min_variance_at_mean(sigma, mu, mean)) <= 1e-4);
    CHECK(p.point.criticality >= -cfg.corrector_tol);
  }
  for (std::size_t i = 1; i < fr.points.size(); ++i) CHECK(fr.points[i - 1].point.image(0) <= fr.points[i].point.image(0));

  SECTION("one seed covers the same connected front") {
    TracerConfig one = cfg;
    one.n_starts = 1;
    TracerConfig many = cfg;
    many.n_starts = 8;
    const auto a = trace(mop, one);
    const auto b = trace(mop, many);
    auto covered = [&](const FrontApproximation& x, const FrontApproximation& y) {
      for (const auto& p : x.points) {
        double nearest = kInf;
        for (const auto& q : y.points) nearest = std::min(nearest, (p.point.image - q.point.image).norm());
        if (nearest > cfg.tau) return false;
      }
      return true;
    };
    CHECK(covered(a, b));
    CHECK(covered(b, a));
  }
  SECTION("cap of one point") {
    TracerConfig cap = cfg;
    cap.max_points = 1;
    const auto r = trace(mop, cap);
    REQUIRE(r.points.size() == 1);
    CHECK(r.points[0].parent == -1);
  }
}

TEST_CASE("three-objective trace", "[tracer][trace]") {
  const PortfolioMop mop = synthetic_mop({Objective::mean, Objective::variance, Objective::skewness});
  const MultiObjective mo = portfolio_objectives(mop);
  TracerConfig cfg;
  cfg.tau = 2.0 * default_tau(mop);
  const FrontApproximation fr = trace(mop, cfg);
  REQUIRE(fr.points.size() > 20);

  int pairs = 0, spaced = 0;
  for (const auto& p : fr.points) {
    CHECK(p.point.criticality >= -cfg.corrector_tol);
    CHECK(std::abs(p.point.x.sum() - 1.0) <= 1e-10);
    const TangentFrame f = tangent_frame(mo, p.point);
    if (f.ok)
      for (const auto& nu : f.nu) CHECK(std::abs((p.point.jacobian * nu).dot(p.point.alpha)) <= 1e-6);
    if (p.parent < 0) continue;
    const double d = (p.point.image - fr.points[std::size_t(p.parent)].point.image).norm();
    ++pairs;
    if (d >= cfg.tau / 2 && d <= 2 * cfg.tau) ++spaced;
  }
  REQUIRE(pairs > 0);
  CHECK(spaced >= 0.9 * pairs);

  SECTION("deterministic across runs and worker counts") {
    TracerConfig par = cfg;
    par.workers = 3;
    const auto again = trace(mop, cfg);
    const auto threaded = trace(mop, par);
    REQUIRE(again.points.size() == fr.points.size());
    REQUIRE(threaded.points.size() == fr.points.size());
    for (std::size_t i = 0; i < fr.points.size(); ++i) {
      CHECK(again.points[i].point.x == fr.points[i].point.x);
      CHECK(threaded.points[i].point.x == fr.points[i].point.x);
      CHECK(threaded.points[i].parent == fr.points[i].parent);
    }
  }
  SECTION("invalid configuration") {
    TracerConfig bad = cfg;
    bad.tau = -1.0;
    CHECK_THROWS_AS(trace(mop, bad), ParameterError);
    bad = cfg;
    bad.n_starts = 0;
    CHECK_THROWS_AS(trace(mop, bad), ParameterError);
  }
}
