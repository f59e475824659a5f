#include <catch_amalgamated.hpp>

#include "hmfront/problem.hpp"
#include "test_support.hpp"

using namespace hmfront;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace ts = testing_support;

namespace {

MomentSetd moments_of(const MatrixXd& r) { return compute_moments(ReturnsMatrixd(ts::asset_names(int(r.cols())), r)); }

const std::vector<Objective> kAll{Objective::mean, Objective::variance, Objective::skewness, Objective::kurtosis};

}  // namespace

TEST_CASE("objective senses", "[problem]") {
  const PortfolioMop mop(moments_of(ts::random_returns(4, 60, 3)), kAll);
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const VectorXd a = ts::random_simplex_point(4, rng);
    const VectorXd b = ts::random_simplex_point(4, rng);
    const auto sa = mop.stats(a);
    const auto sb = mop.stats(b);
    const bool natural = sa.mean > sb.mean && sa.variance < sb.variance && sa.skewness > sb.skewness &&
                         sa.kurtosis < sb.kurtosis;
    if (natural) CHECK(ts::strictly_dominates(mop.evaluate(a), mop.evaluate(b)));
    CHECK((mop.evaluate(a) - mop.to_internal(sa)).norm() <= 1e-12 * (1.0 + mop.evaluate(a).norm()));
  }
  CHECK(sense_sign(Objective::mean) == -1.0);
  CHECK(sense_sign(Objective::variance) == 1.0);
  CHECK(sense_sign(Objective::skewness) == -1.0);
  CHECK(sense_sign(Objective::kurtosis) == 1.0);
}

TEST_CASE("objective subsets keep their order", "[problem]") {
  const MomentSetd m = moments_of(ts::random_returns(3, 40, 4));
  const PortfolioMop mop(m, {Objective::skewness, Objective::mean});
  const VectorXd w = (VectorXd(3) << 0.2, 0.5, 0.3).finished();
  const auto s = portfolio_stats(w, m);
  CHECK(mop.evaluate(w)(0) == Catch::Approx(-s.skewness).epsilon(1e-12));
  CHECK(mop.evaluate(w)(1) == Catch::Approx(-s.mean).epsilon(1e-12));
  CHECK(mop.objective_count() == 2);
}

TEST_CASE("problem derivatives match finite differences", "[problem]") {
  const PortfolioMop mop(moments_of(ts::random_returns(4, 50, 11)), kAll);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const VectorXd w = ts::random_simplex_point(4, rng);
    const auto d = mop.derivatives(w);
    const MatrixXd fd = ts::fd_jacobian([&](const VectorXd& x) { return mop.evaluate(x); }, w);
    CHECK((d.jacobian - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
    CHECK((d.jacobian - mop.jacobian(w)).norm() == 0.0);
    for (int i = 0; i < 4; ++i) {
      const MatrixXd fdh = ts::fd_jacobian([&](const VectorXd& x) { return VectorXd(mop.jacobian(x).row(i).transpose()); }, w);
      CHECK((d.hessians[std::size_t(i)] - fdh).norm() <= 1e-6 * (1.0 + fdh.norm()));
      VectorXd z(6);
      z << w, 0.3, -0.2;
      VectorXd g;
      MatrixXd h;
      const double v = mop.objective_function(i, 6).eval(z, &g, &h);
      CHECK(v == d.value(i));
      CHECK(g.tail(2).norm() == 0.0);
      CHECK((g.head(4) - d.jacobian.row(i).transpose()).norm() == 0.0);
      CHECK(h.rows() == 6);
    }
  }
}

TEST_CASE("problem validation", "[problem]") {
  const MomentSetd m = moments_of(ts::random_returns(3, 20, 1));
  CHECK_THROWS_AS(PortfolioMop(m, {Objective::mean}), ParameterError);
  CHECK_THROWS_AS(PortfolioMop(m, {Objective::mean, Objective::mean}), ParameterError);
  CHECK_THROWS_AS(PortfolioMop(m, {Objective::mean, Objective::variance}, -0.1), ParameterError);
  CHECK_THROWS_AS(parse_objective("sharpe"), ParameterError);
  CHECK(parse_objective("kurtosis") == Objective::kurtosis);
  const PortfolioMop mop(m, {Objective::mean, Objective::variance}, 0.25);
  CHECK(mop.lower_bounds()(0) == -0.25);
  CHECK(mop.infeasibility((VectorXd(3) << -0.25, 0.5, 0.75).finished()) == 0.0);
  CHECK(mop.infeasibility((VectorXd(3) << -0.5, 0.75, 0.75).finished()) == Catch::Approx(0.25));
  CHECK_THROWS_AS(mop.evaluate(VectorXd::Ones(2)), ShapeError);
}

TEST_CASE("utility coefficients", "[utility]") {
  const UtilityParams u(2.0);
  CHECK(u.lambda1() == Catch::Approx(2.0));
  CHECK(u.lambda2() == Catch::Approx(4.0 / 3.0));
  CHECK(u.lambda3() == Catch::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(UtilityParams(0.0), ParameterError);
  CHECK_THROWS_AS(UtilityParams(-1.0), ParameterError);
  double prev1 = 1e9, prev2 = 1e9, prev3 = 1e9;
  for (double l : {1.0, 0.5, 0.1, 1e-3}) {
    const UtilityParams v(l);
    CHECK(v.lambda1() < prev1);
    CHECK(v.lambda2() < prev2);
    CHECK(v.lambda3() < prev3);
    prev1 = v.lambda1();
    prev2 = v.lambda2();
    prev3 = v.lambda3();
  }
}

TEST_CASE("utility objective values", "[utility]") {
  SECTION("constant returns leave only the mean") {
    MatrixXd r(5, 2);
    r.col(0).setConstant(0.01);
    r.col(1).setConstant(0.03);
    const PortfolioMop mop(moments_of(r));
    const VectorXd w = (VectorXd(2) << 0.25, 0.75).finished();
    CHECK(utility_objective(w, mop, UtilityParams(3.0)) == -(0.25 * 0.01 + 0.75 * 0.03));
  }
  SECTION("observation-loop oracle") {
    const MatrixXd r = ts::random_returns(4, 50, 21);
    const PortfolioMop mop(moments_of(r));
    std::mt19937_64 rng(4);
    const UtilityParams u(1.7);
    for (int rep = 0; rep < 10; ++rep) {
      const VectorXd w = ts::random_simplex_point(4, rng);
      const double oracle = -ts::observation_mean(w, r) + u.lambda1() * ts::observation_moment(w, r, 2) -
                            u.lambda2() * ts::observation_moment(w, r, 3) + u.lambda3() * ts::observation_moment(w, r, 4);
      CHECK(utility_objective(w, mop, u) == Catch::Approx(oracle).epsilon(1e-10).margin(1e-12));
      VectorXd g;
      MatrixXd h;
      CHECK(utility_function(mop, u).eval(w, &g, &h) == Catch::Approx(oracle).epsilon(1e-10).margin(1e-12));
      const VectorXd fd = ts::fd_gradient([&](const VectorXd& x) { return utility_objective(x, mop, u); }, w);
      CHECK((g - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
    }
  }
  SECTION("asset relabeling") {
    const MatrixXd r = ts::random_returns(4, 30, 8);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 2, 0, 3, 1;
    const MatrixXd rp = r * perm;
    const PortfolioMop a(moments_of(r)), b(moments_of(rp));
    const VectorXd w = (VectorXd(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const UtilityParams u(4.0);
    CHECK(utility_objective(perm.transpose() * w, b, u) == Catch::Approx(utility_objective(w, a, u)).epsilon(1e-12));
  }
  SECTION("small lambda approaches the negative mean") {
    const PortfolioMop mop(moments_of(ts::random_returns(3, 40, 5)));
    const VectorXd w = mop.equal_weights();
    const double target = -mop.stats(w).mean;
    CHECK(utility_objective(w, mop, UtilityParams(1e-6)) == Catch::Approx(target).epsilon(1e-4));
  }
}

TEST_CASE("lambda schedule", "[utility]") {
  const auto s = default_lambda_schedule();
  REQUIRE(s.size() == 10);
  CHECK(s.front() == 20.0);
  CHECK(s.back() == 2.0);
  const PortfolioMop mop(moments_of(ts::random_returns(3, 40, 5)));
  CHECK_THROWS_AS(iterative_utility_optimize(mop, {2.0, 4.0}), ParameterError);
  CHECK_THROWS_AS(iterative_utility_optimize(mop, {2.0, 0.0}), ParameterError);
  CHECK_THROWS_AS(iterative_utility_optimize(mop, {}), ParameterError);
}

TEST_CASE("frozen iteration reduces to mean-variance problems", "[utility]") {
  // Antithetic returns: every odd central moment vanishes.
  const MatrixXd base = ts::random_returns(3, 30, 17, 0.0);
  MatrixXd r(60, 3);
  const VectorXd center = (VectorXd(3) << 0.05, 0.02, -0.01).finished();
  const VectorXd mean = base.colwise().mean().transpose();
  for (int t = 0; t < 30; ++t) {
    r.row(t) = center.transpose() + 0.2 * (base.row(t) - mean.transpose());
    r.row(30 + t) = center.transpose() - 0.2 * (base.row(t) - mean.transpose());
  }
  const PortfolioMop mop(moments_of(r));
  CHECK(mop.moments().m3().cwiseAbs().maxCoeff() < 1e-15);
  const auto steps = iterative_utility_optimize(mop, default_lambda_schedule());
  REQUIRE(steps.size() == 10);
  for (const auto& s : steps) {
    const UtilityParams u(s.lambda);
    const auto oracle = ts::simplex_qp_by_enumeration(2.0 * u.lambda1() * mop.moments().sigma(), -mop.moments().mu());
    CHECK((s.weights - oracle.w).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("frozen iteration reaches a fixed point", "[utility]") {
  const PortfolioMop mop(moments_of(ts::random_returns(3, 80, 23, 1.0)));
  const auto steps = iterative_utility_optimize(mop, default_lambda_schedule());
  REQUIRE(steps.size() == 10);
  for (const auto& s : steps) {
    CHECK(s.repeats <= 20);
    CHECK(s.fixed_point_residual <= 1e-6);
    CHECK(mop.infeasibility(s.weights) <= 1e-9);
    CHECK(s.utility == Catch::Approx(utility_objective(s.weights, mop, UtilityParams(s.lambda))));
  }
  const auto again = iterative_utility_optimize(mop, default_lambda_schedule());
  for (std::size_t i = 0; i < steps.size(); ++i) CHECK(again[i].weights == steps[i].weights);
}

TEST_CASE("full quartic utility against a simplex sweep", "[utility]") {
  const PortfolioMop mop(moments_of(ts::random_returns(3, 60, 31, 1.0)));
  const UtilityParams u(3.0);
  const auto best = optimize_utility(mop, u);
  double sweep = 1e300;
  for (const auto& w : ts::simplex_grid3(200)) sweep = std::min(sweep, utility_objective(w, mop, u));
  CHECK(best.utility <= sweep + 1e-12);
  CHECK(mop.infeasibility(best.weights) <= 1e-9);
}
