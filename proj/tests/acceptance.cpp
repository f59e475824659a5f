// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hmfront/adaptive_epsilon.hpp"
#include "hmfront/cli.hpp"
#include "hmfront/moments.hpp"
#include "hmfront/pareto_tracer.hpp"
#include "hmfront/quality.hpp"
#include "hmfront/random.hpp"
#include "hmfront/scalarization.hpp"
#include "hmfront/synthetic.hpp"
#include "test_support.hpp"

using namespace hmfront;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

MomentSetd moments_of(const MatrixXd& r) { return compute_moments(ReturnsMatrixd(ts::asset_names(int(r.cols())), r)); }

PortfolioMop synthetic_mop(std::vector<Objective> objectives = {Objective::mean, Objective::variance,
                                                                Objective::skewness}) {
  return PortfolioMop(compute_moments(synthetic_returns(3, 250, 7, 0.3)), std::move(objectives));
}

ScalarizationOptions with_anchor_starts(const Anchors& an) {
  ScalarizationOptions opt;
  for (Index j = 0; j < an.weights.cols(); ++j) opt.starts.push_back(an.weights.col(j));
  return opt;
}

double rel_err(const MatrixXd& a, const MatrixXd& b) {
  const double nb = b.norm();
  return nb == 0.0 ? a.norm() : (a - b).norm() / nb;
}

Outcome moment_oracle() {
  double worst = 0.0;
  std::mt19937_64 rng(101);
  for (unsigned seed = 0; seed < 20; ++seed) {
    const MatrixXd r = ts::random_returns(4, 50, 1000 + seed);
    const MomentSetd m = moments_of(r);
    for (int rep = 0; rep < 5; ++rep) {
      const VectorXd w = ts::random_simplex_point(4, rng);
      const auto s = portfolio_stats(w, m);
      worst = std::max({worst, std::abs(s.variance - ts::observation_moment(w, r, 2)),
                        std::abs(s.skewness - ts::observation_moment(w, r, 3)),
                        std::abs(s.kurtosis - ts::observation_moment(w, r, 4))});
    }
  }
  return {worst <= 1e-10, "max abs error " + fmt(worst) + " over 100 portfolios"};
}

Outcome derivative_check() {
  const MatrixXd r = ts::random_returns(4, 50, 77);
  const MomentSetd m = moments_of(r);
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd w = ts::random_simplex_point(4, rng);
    const auto d = stats_gradients(w, m);
    for (std::size_t k = 0; k < 4; ++k) {
      auto f = [&](const VectorXd& x) { return portfolio_stats(x, m)[int(k)]; };
      auto g = [&](const VectorXd& x) { return VectorXd(stats_gradients(x, m).gradient[k]); };
      worst = std::max(worst, rel_err(d.gradient[k], ts::fd_gradient(f, w)));
      if (k > 0) worst = std::max(worst, rel_err(d.hessian[k], ts::fd_jacobian(g, w)));
    }
  }
  return {worst < 1e-5, "max relative error " + fmt(worst)};
}

Outcome nbi_sp_msf() {
  // Mean-variance on three assets is the convex case.
  const PortfolioMop mop = synthetic_mop({Objective::mean, Objective::variance});
  const Anchors an = compute_anchors(mop);
  const ScalarizationOptions opt = with_anchor_starts(an);
  int pairs = 0;
  double dv = 0.0, dw = 0.0;
  for (const VectorXd& beta : dirichlet_samples(2, 20, 17)) {
    const NbiParams nbi = nbi_params(an, beta);
    const auto n = solve_nbi(mop, nbi, opt);
    if (!n.converged()) continue;
    const auto sp = solve_sp(mop, map_nbi_to_sp(nbi), true, opt);
    const auto msf = solve_msf(mop, map_nbi_to_msf(nbi), opt);
    if (sp.converged()) {
      ++pairs;
      dv = std::max(dv, std::abs(n.aux + sp.aux));
      dw = std::max(dw, (n.weights - sp.weights).cwiseAbs().maxCoeff());
    }
    if (msf.converged()) {
      ++pairs;
      dv = std::max(dv, std::abs(n.aux - msf.aux));
      dw = std::max(dw, (n.weights - msf.weights).cwiseAbs().maxCoeff());
    }
  }
  return {pairs > 0 && dv <= 1e-6 && dw <= 1e-5,
          std::to_string(pairs) + " converged pairs, value gap " + fmt(dv) + ", weight gap " + fmt(dw)};
}

Outcome sf_sp() {
  const PortfolioMop mop = synthetic_mop();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  double worst = 0.0;
  int compared = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd y = ts::random_simplex_point(3, rng);
    const VectorXd g = (VectorXd(3) << u(rng), u(rng), u(rng)).finished();
    const SfParams sf = SfParams::from_weights(y, g);
    const auto a = solve_sf(mop, sf);
    if (!a.converged()) return {false, "SF did not converge at reference " + std::to_string(rep)};
    const auto b = solve_sp(mop, map_sf_to_sp(mop, sf, mop.stats(a.weights)), false);
    if (!b.converged()) return {false, "mapped SP did not converge at reference " + std::to_string(rep)};
    ++compared;
    worst = std::max(worst, std::abs(a.aux + b.aux));
  }
  return {worst <= 1e-8, std::to_string(compared) + " references, max |delta + t| " + fmt(worst)};
}

Outcome epsilon_sp() {
  const PortfolioMop mop = synthetic_mop();
  const EpsilonGrid g = build_grid(mop, {10, 10});
  const GridRun run = solve_grid(mop, g);
  double worst = 0.0;
  int feasible = 0;
  for (const auto& c : run.cells) {
    if (c.status != CellStatus::converged) continue;
    ++feasible;
    const auto sp = solve_sp(mop, epsilon_as_sp(g.full(c.eps), g.minimized), false);
    if (!sp.converged()) return {false, "SP form failed on a feasible cell"};
    worst = std::max(worst, std::abs(sp.aux - c.value));
  }
  return {feasible > 0 && worst <= 1e-6, std::to_string(feasible) + " feasible cells, max gap " + fmt(worst)};
}

Outcome adaptive_structure() {
  const PortfolioMop mop = synthetic_mop();
  AdaptiveConfig cfg;
  cfg.counts = {50, 50};
  const AdaptiveRun run = run_adaptive(mop, cfg);
  const std::size_t cells = run.initial.cells.size();

  // A cell is feasible when some portfolio of a 1e-2 simplex sweep meets both bounds.
  std::vector<VectorXd> sweep;
  for (const auto& w : ts::simplex_grid3(100)) sweep.push_back(mop.evaluate(w));
  int feasible = 0, converged = 0;
  for (const auto& c : run.initial.cells) {
    bool ok = false;
    for (const auto& f : sweep)
      if (f(run.grid.bounded[0]) <= c.eps(0) && f(run.grid.bounded[1]) <= c.eps(1)) {
        ok = true;
        break;
      }
    if (!ok) continue;
    ++feasible;
    converged += c.status == CellStatus::converged;
  }
  const double rate = feasible ? double(converged) / feasible : 0.0;

  const MatrixXd img = dominance_filter(run.archive.images(), 1e-7);
  int dominated = 0;
  for (Index i = 0; i < img.rows(); ++i)
    for (Index j = 0; j < img.rows(); ++j)
      dominated += ts::strictly_dominates(img.row(j).transpose(), img.row(i).transpose(), 1e-7);
  return {cells == 2500 && rate >= 0.8 && dominated == 0,
          std::to_string(cells) + " cells, " + std::to_string(converged) + "/" + std::to_string(feasible) +
              " sweep-feasible converged, " + std::to_string(img.rows()) + " filtered points, " +
              std::to_string(dominated) + " dominated"};
}

Outcome refinement_lattice() {
  const double alpha = 0.05;
  ArchiveEntry c;
  c.eps = Eigen::Vector2d(0.4, -0.1);
  c.multipliers = Eigen::Vector2d::Zero();
  const auto flat = refinement_points(c, alpha, 1);
  bool ok = flat.size() == 8;
  std::size_t idx = 0;
  for (int i = -1; i <= 1 && ok; ++i)
    for (int j = -1; j <= 1 && ok; ++j) {
      if (i == 0 && j == 0) continue;
      ok = flat[idx++] == Eigen::Vector2d(0.4 + i * alpha, -0.1 + j * alpha);
    }
  if (!ok) return {false, "zero-multiplier neighborhood is not the alpha lattice"};

  c.multipliers = Eigen::Vector2d(3.0, 0.7);
  const double s0 = alpha / (1.0 + 9.0), s1 = alpha / (1.0 + 0.49);
  const auto scaled = refinement_points(c, alpha, 1);
  idx = 0;
  for (int i = -1; i <= 1 && ok; ++i)
    for (int j = -1; j <= 1 && ok; ++j) {
      if (i == 0 && j == 0) continue;
      ok = scaled[idx++] == Eigen::Vector2d(0.4 + i * s0, -0.1 + j * s1);
    }
  return {ok && scaled.size() == 8, ok ? "8 points, exact spacing with and without multipliers"
                                       : "multiplier-scaled spacing differs"};
}

/// Smallest long-only variance at a given mean, by support enumeration.
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

Outcome tracer_mean_variance() {
  const PortfolioMop mop = synthetic_mop({Objective::mean, Objective::variance});
  TracerConfig cfg;
  cfg.tau = default_tau(mop);
  const FrontApproximation fr = trace(mop, cfg);
  const MatrixXd& sigma = mop.moments().sigma();
  const VectorXd& mu = mop.moments().mu();
  double worst = 0.0;
  for (const auto& p : fr.points) {
    // The frontier is a curve in (mean, variance); the vertical gap bounds the Euclidean one.
    const double mean = -p.point.image(0);
    worst = std::max(worst, std::abs(p.point.image(1) - min_variance_at_mean(sigma, mu, mean)));
  }
  return {fr.points.size() > 1 && worst <= 1e-4,
          std::to_string(fr.points.size()) + " points, max distance " + fmt(worst)};
}

Outcome tracer_spacing() {
  const PortfolioMop mop = synthetic_mop();
  TracerConfig cfg;
  cfg.tau = default_tau(mop);
  const FrontApproximation fr = trace(mop, cfg);
  int pairs = 0, spaced = 0;
  for (const auto& p : fr.points) {
    if (p.parent < 0) continue;
    const double d = (p.point.image - fr.points[std::size_t(p.parent)].point.image).norm();
    ++pairs;
    spaced += d >= cfg.tau / 2 && d <= 2 * cfg.tau;
  }
  const double share = pairs ? double(spaced) / pairs : 0.0;
  return {pairs > 0 && share >= 0.9,
          std::to_string(spaced) + "/" + std::to_string(pairs) + " steps in [tau/2, 2 tau] (" + fmt(100 * share) +
              "%), tau " + fmt(cfg.tau)};
}

Outcome corrector_criticality() {
  const PortfolioMop mop = synthetic_mop();
  const MultiObjective mo = portfolio_objectives(mop);
  std::vector<VectorXd> sweep;
  for (const auto& w : ts::simplex_grid3(100)) sweep.push_back(mop.evaluate(w));
  std::mt19937_64 rng(50);
  int starts = 0, bad = 0;
  double worst_t = kInf;
  while (starts < 50) {
    const VectorXd w = ts::random_simplex_point(3, rng);
    const VectorXd fw = mop.evaluate(w);
    bool dominated = false;
    for (const auto& f : sweep)
      if (ts::strictly_dominates(f, fw)) {
        dominated = true;
        break;
      }
    if (!dominated) continue;
    ++starts;
    const auto c = corrector(mo, w, 1e-9);
    worst_t = std::min(worst_t, c.point.criticality);
    bool ok = c.accepted && c.point.criticality >= -1e-8;
    for (const auto& f : sweep)
      if (ts::strictly_dominates(f, c.point.image)) ok = false;
    bad += !ok;
  }
  return {bad == 0, std::to_string(starts) + " dominated starts, " + std::to_string(bad) + " rejected, min t* " +
                        fmt(worst_t)};
}

Outcome pgp_report() {
  // Rescale so that variance = 1 is attainable.
  MatrixXd r = synthetic_returns(3, 250, 7, 0.3).observations();
  double lo = kInf, hi = 0.0;
  for (Index j = 0; j < 3; ++j) hi = std::max(hi, ts::observation_moment(VectorXd::Unit(3, j), r, 2));
  for (const auto& w : ts::simplex_grid3(200)) lo = std::min(lo, ts::observation_moment(w, r, 2));
  r *= std::pow(lo * hi, -0.25);
  const PortfolioMop mop(moments_of(r));
  const PgpBounds bounds = pgp_bounds(mop);
  const Anchors an = compute_anchors(mop);
  ScalarizationOptions opt = with_anchor_starts(an);
  for (const auto& w : dirichlet_samples(3, 20, 7)) opt.starts.push_back(w);

  int solved = 0, applicable = 0, finite = 0, mu2_zero = 0;
  double max_residual = 0.0;
  for (const auto& beta : dirichlet_samples(3, 20, 11)) {
    const NbiParams nbi = nbi_params(an, beta);
    const auto res = solve_nbi(mop, nbi, opt);
    if (!res.converged()) continue;
    ++solved;
    const auto rep = check_pgp_kkt(mop, nbi, res, bounds);
    if (!rep.applicable) continue;
    ++applicable;
    const bool ok = std::isfinite(rep.first_set_residual) && (!rep.alpha || std::isfinite(*rep.alpha)) &&
                    (!rep.beta || std::isfinite(*rep.beta)) &&
                    (!rep.second_set_residual || std::isfinite(*rep.second_set_residual));
    finite += ok;
    mu2_zero += std::abs(rep.mu2) <= 1e-6;
    max_residual = std::max(max_residual, rep.first_set_residual);
  }
  return {applicable > 0 && finite == applicable,
          std::to_string(applicable) + "/" + std::to_string(solved) + " NBI solutions applicable, " +
              std::to_string(finite) + " finite reports, mu2 ~ 0 in " + std::to_string(mu2_zero) +
              ", max stationarity residual " + fmt(max_residual) + " (report only)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "hmfront_acceptance_cli";
  fs::remove_all(root);
  const std::vector<std::string> instance{"--synthetic", "3", "150", "9", "0.3", "--seed", "4"};
  const std::vector<std::pair<std::vector<std::string>, std::string>> commands{
      {{"moments", "--full-tensors"}, "moments.json"},
      {{"front", "--method", "epsilon", "--params", R"({"counts":[15,15]})", "--gnuplot"}, "front.json"},
      {{"front", "--method", "tracer"}, "front.json"},
      {{"front", "--method", "sp", "--params", R"({"divisions":6})"}, "front.json"},
      {{"front", "--method", "pgp"}, "front.json"},
      {{"front", "--method", "utility_iterative"}, "front.json"},
      {{"verify", "--params", R"({"samples":8,"grid":[5,5]})"}, "verify.json"},
      {{"quality", "--params", R"({"reference_counts":[30,30]})"}, "quality.json"},
  };
  int runs = 0;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      // quality reads the front written by the previous command into the same directory.
      const fs::path dir = root;
      std::vector<std::string> args{"hmfront"};
      args.insert(args.end(), commands[k].first.begin(), commands[k].first.end());
      args.insert(args.end(), instance.begin(), instance.end());
      args.insert(args.end(), {"--out", dir.string(), "--workers", rep == 0 ? "1" : "3"});
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream out, err;
      const int code = run_cli(int(argv.size()), argv.data(), out, err);
      if (code != 0) return {false, commands[k].first[0] + " exited with " + std::to_string(code) + ": " + err.str()};
      outputs[rep] = slurp(dir / commands[k].second);
      if (commands[k].second == "front.json") outputs[rep] += slurp(dir / "front.csv");
      ++runs;
    }
    if (outputs[0].empty() || outputs[0] != outputs[1])
      return {false, commands[k].first[0] + " output differs between runs"};
  }
  fs::remove_all(root);
  return {true, std::to_string(runs) + " runs, outputs byte-identical (workers 1 and 3)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"moment tensors match the observation loop", moment_oracle},
      {"analytic derivatives match central differences", derivative_check},
      {"NBI, modified SP and mapped MSF agree", nbi_sp_msf},
      {"SF and mapped SP agree", sf_sp},
      {"epsilon-constraint values equal the SP values", epsilon_sp},
      {"adaptive epsilon grid structure", adaptive_structure},
      {"refinement lattice", refinement_lattice},
      {"mean-variance trace on the analytic frontier", tracer_mean_variance},
      {"tracer spacing", tracer_spacing},
      {"corrector criticality from dominated starts", corrector_criticality},
      {"goal-program stationarity report", pgp_report},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << " [" << fmt(secs) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - std::size_t(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
