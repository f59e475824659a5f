#include <catch_amalgamated.hpp>

#include <sstream>

#include "hmfront/moments.hpp"
#include "test_support.hpp"

using namespace hmfront;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace ts = testing_support;

namespace {

MomentSetd moments_of(const MatrixXd& r) { return compute_moments(ReturnsMatrixd(ts::asset_names(int(r.cols())), r)); }

double rel_err(const MatrixXd& a, const MatrixXd& b) {
  const double nb = b.norm();
  return nb == 0.0 ? a.norm() : (a - b).norm() / nb;
}

}  // namespace

TEST_CASE("constant series has zero central moments", "[moments]") {
  MatrixXd r(3, 1);
  r << 0.01, 0.01, 0.01;
  const auto m = moments_of(r);
  CHECK(m.mu()(0) == Catch::Approx(0.01).epsilon(1e-15));
  CHECK(m.sigma()(0, 0) == 0.0);
  CHECK(m.m3()(0, 0) == 0.0);
  CHECK(m.m4()(0, 0) == 0.0);
}

TEST_CASE("symmetric three-point series", "[moments]") {
  MatrixXd r(3, 1);
  r << -1.0, 0.0, 1.0;
  const auto m = moments_of(r);
  CHECK(m.mu()(0) == 0.0);
  CHECK(m.sigma()(0, 0) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.m3()(0, 0) == 0.0);
  CHECK(m.m4()(0, 0) == Catch::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("tensor contractions match the observation loop", "[moments]") {
  std::mt19937_64 rng(7);
  for (unsigned seed = 0; seed < 5; ++seed) {
    const MatrixXd r = ts::random_returns(4, 50, seed);
    const auto m = moments_of(r);
    for (int rep = 0; rep < 5; ++rep) {
      const VectorXd w = ts::random_simplex_point(4, rng);
      const auto s = portfolio_stats(w, m);
      CHECK(std::abs(s.mean - ts::observation_mean(w, r)) <= 1e-12);
      CHECK(std::abs(s.variance - ts::observation_moment(w, r, 2)) <= 1e-10);
      CHECK(std::abs(s.skewness - ts::observation_moment(w, r, 3)) <= 1e-10);
      CHECK(std::abs(s.kurtosis - ts::observation_moment(w, r, 4)) <= 1e-10);
    }
  }
}

TEST_CASE("tensors are exactly symmetric and covariance is PSD", "[moments]") {
  const MatrixXd r = ts::random_returns(4, 50, 3);
  const auto m = moments_of(r);
  const Index n = 4;
  CHECK((m.sigma() - m.sigma().transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.sigma());
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * m.sigma().trace());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k) {
        const double v = m.m3()(i, j * n + k);
        CHECK(m.m3()(j, i * n + k) == v);
        CHECK(m.m3()(k, j * n + i) == v);
        CHECK(m.m3()(i, k * n + j) == v);
        for (Index l = 0; l < n; ++l) {
          const double u = m.m4()(i, (j * n + k) * n + l);
          CHECK(m.m4()(l, (j * n + k) * n + i) == u);
          CHECK(m.m4()(j, (i * n + l) * n + k) == u);
        }
      }
}

TEST_CASE("unit weights select the asset's own moments", "[moments][stats]") {
  const MatrixXd r = ts::random_returns(3, 40, 11);
  const auto m = moments_of(r);
  for (Index i = 0; i < 3; ++i) {
    const VectorXd e = VectorXd::Unit(3, i);
    const auto s = portfolio_stats(e, m);
    CHECK(s.mean == Catch::Approx(m.mu()(i)).epsilon(1e-14));
    CHECK(s.variance == Catch::Approx(m.sigma()(i, i)).epsilon(1e-14));
    CHECK(s.skewness == Catch::Approx(m.m3()(i, i * 3 + i)).epsilon(1e-14));
    CHECK(s.kurtosis == Catch::Approx(m.m4()(i, (i * 3 + i) * 3 + i)).epsilon(1e-14));
  }
}

TEST_CASE("duplicated asset at half weight equals the asset alone", "[moments][stats]") {
  const MatrixXd base = ts::random_returns(1, 30, 5);
  MatrixXd r(30, 2);
  r << base, base;
  const auto m2 = moments_of(r);
  const auto m1 = moments_of(base);
  const auto a = portfolio_stats(VectorXd::Constant(2, 0.5), m2);
  const auto b = portfolio_stats(VectorXd::Ones(1), m1);
  CHECK(a.mean == Catch::Approx(b.mean).epsilon(1e-13));
  CHECK(a.variance == Catch::Approx(b.variance).epsilon(1e-13));
  CHECK(a.skewness == Catch::Approx(b.skewness).epsilon(1e-12).margin(1e-15));
  CHECK(a.kurtosis == Catch::Approx(b.kurtosis).epsilon(1e-13));
}

TEST_CASE("scaling returns scales the statistics by powers of c", "[moments][stats]") {
  const MatrixXd r = ts::random_returns(3, 40, 21);
  const double c = 2.5;
  const auto m = moments_of(r);
  const auto mc = moments_of(c * r);
  VectorXd w(3);
  w << 0.2, 0.5, 0.3;
  const auto s = portfolio_stats(w, m);
  const auto sc = portfolio_stats(w, mc);
  CHECK(sc.mean == Catch::Approx(c * s.mean).epsilon(1e-13));
  CHECK(sc.variance == Catch::Approx(c * c * s.variance).epsilon(1e-13));
  CHECK(sc.skewness == Catch::Approx(c * c * c * s.skewness).epsilon(1e-12));
  CHECK(sc.kurtosis == Catch::Approx(std::pow(c, 4) * s.kurtosis).epsilon(1e-13));
  const auto scaled = portfolio_stats(w, m.scaled(c));
  CHECK(scaled.kurtosis == Catch::Approx(sc.kurtosis).epsilon(1e-13));
}

TEST_CASE("permuting assets and weights together leaves statistics unchanged", "[moments][stats]") {
  const MatrixXd r = ts::random_returns(4, 50, 8);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const MatrixXd rp = r * perm;
  VectorXd w(4);
  w << 0.1, 0.4, 0.3, 0.2;
  const VectorXd wp = perm.transpose() * w;
  const auto a = portfolio_stats(w, moments_of(r));
  const auto b = portfolio_stats(wp, moments_of(rp));
  CHECK(a.mean == Catch::Approx(b.mean).epsilon(1e-13));
  CHECK(a.variance == Catch::Approx(b.variance).epsilon(1e-13));
  CHECK(a.skewness == Catch::Approx(b.skewness).epsilon(1e-12));
  CHECK(a.kurtosis == Catch::Approx(b.kurtosis).epsilon(1e-13));
}

TEST_CASE("gradient special cases", "[moments][gradients]") {
  SECTION("identity covariance gives grad var = 2w") {
    const Index n = 3;
    MomentSetd m(VectorXd::Zero(n), MatrixXd::Identity(n, n), MatrixXd::Zero(n, n * n), MatrixXd::Zero(n, n * n * n), 10);
    VectorXd w(3);
    w << 0.3, -0.2, 0.9;
    CHECK((stats_gradients(w, m).gradient[1] - 2.0 * w).norm() == 0.0);
  }
  SECTION("scalar cubic form") {
    MomentSetd m(VectorXd::Constant(1, 0.1), MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, 0.7),
                 MatrixXd::Constant(1, 1, 2.0), 10);
    const auto d = stats_gradients(VectorXd::Ones(1), m);
    CHECK(d.gradient[2](0) == Catch::Approx(3.0 * 0.7).epsilon(1e-15));
  }
}

TEST_CASE("analytic derivatives agree with central differences", "[moments][gradients]") {
  const MatrixXd r = ts::random_returns(4, 50, 42);
  const auto m = moments_of(r);
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const VectorXd w = ts::random_simplex_point(4, rng);
    const auto d = stats_gradients(w, m);
    for (int k = 0; k < 4; ++k) {
      auto f = [&](const VectorXd& x) { return portfolio_stats(x, m)[k]; };
      auto g = [&](const VectorXd& x) { return VectorXd(stats_gradients(x, m).gradient[static_cast<std::size_t>(k)]); };
      CHECK(rel_err(d.gradient[static_cast<std::size_t>(k)], ts::fd_gradient(f, w)) < 1e-5);
      if (k == 0)
        CHECK(d.hessian[0].norm() == 0.0);
      else
        CHECK(rel_err(d.hessian[static_cast<std::size_t>(k)], ts::fd_jacobian(g, w)) < 1e-5);
    }
  }
}

TEST_CASE("observation-loop evaluator matches the tensor path", "[moments][fallback]") {
  const MatrixXd r = ts::random_returns(4, 50, 9);
  const ReturnsMatrixd returns(ts::asset_names(4), r);
  const auto m = compute_moments(returns);
  const ObservationMoments<double> obs(returns);
  VectorXd w(4);
  w << 0.4, 0.1, 0.3, 0.2;
  const auto a = portfolio_stats(w, m);
  const auto b = obs.stats(w);
  CHECK(std::abs(a.variance - b.variance) < 1e-12);
  CHECK(std::abs(a.skewness - b.skewness) < 1e-12);
  CHECK(std::abs(a.kurtosis - b.kurtosis) < 1e-12);
  const auto da = stats_gradients(w, m);
  const auto db = obs.derivatives(w);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK((da.gradient[k] - db.gradient[k]).norm() < 1e-11);
    CHECK((da.hessian[k] - db.hessian[k]).norm() < 1e-11);
  }
}

TEST_CASE("single precision instantiation", "[moments]") {
  Eigen::MatrixXf r(4, 2);
  r << 0.1f, 0.2f, -0.1f, 0.0f, 0.3f, -0.2f, 0.0f, 0.1f;
  const auto m = compute_moments(ReturnsMatrix<float>({"a", "b"}, r));
  const auto s = portfolio_stats(Eigen::VectorXf::Constant(2, 0.5f), m);
  CHECK(s.variance > 0.0f);
}

TEST_CASE("shape and data errors", "[moments][errors]") {
  const auto m = moments_of(ts::random_returns(3, 10, 1));
  CHECK_THROWS_AS(portfolio_stats(VectorXd::Ones(2), m), ShapeError);
  CHECK_THROWS_AS(stats_gradients(VectorXd::Ones(4), m), ShapeError);
  CHECK_THROWS_AS(ReturnsMatrixd({"a"}, MatrixXd::Zero(1, 1)), InsufficientDataError);
  CHECK_THROWS_AS(ReturnsMatrixd({"a", "a"}, MatrixXd::Zero(3, 2)), DataError);
  MatrixXd bad = MatrixXd::Zero(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(ReturnsMatrixd({"a", "b"}, bad), Catch::Matchers::ContainsSubstring("row 2, column 2"));
}

TEST_CASE("CSV ingestion", "[moments][csv]") {
  SECTION("well-formed file") {
    std::istringstream in("\xEF\xBB\xBF" "AAA, BBB\r\n0.01,0.02\n\n-0.01,+0.03\n0.00,1e-3\n");
    const auto r = read_returns_csv(in);
    REQUIRE(r.asset_count() == 2);
    REQUIRE(r.periods() == 3);
    CHECK(r.assets()[0] == "AAA");
    CHECK(r.assets()[1] == "BBB");
    CHECK(r.observations()(1, 1) == 0.03);
    CHECK(r.observations()(2, 1) == 0.001);
  }
  SECTION("unparseable cell names line and column") {
    std::istringstream in("a,b\n0.1,0.2\n0.1,abc\n");
    CHECK_THROWS_WITH(read_returns_csv(in), Catch::Matchers::ContainsSubstring("line 3, column 2"));
  }
  SECTION("ragged row") {
    std::istringstream in("a,b\n0.1\n");
    CHECK_THROWS_AS(read_returns_csv(in), DataError);
  }
  SECTION("single observation") {
    std::istringstream in("a,b\n0.1,0.2\n");
    CHECK_THROWS_AS(read_returns_csv(in), InsufficientDataError);
  }
}
