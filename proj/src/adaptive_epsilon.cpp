#include "hmfront/adaptive_epsilon.hpp"

#include <cmath>
#include <limits>

#include "hmfront/error.hpp"
#include "hmfront/parallel.hpp"
#include "hmfront/random.hpp"

namespace hmfront {
namespace {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimum of sign * F_i over the feasible set, multistart.
double extreme(const PortfolioMop& p, int i, double sign, const ScalarizationOptions& o) {
  const Index n = p.assets();
  const SmoothFunction fi = p.objective_function(i);
  NlpProblem q;
  q.objective = {[fi, sign](const VectorXd& w, VectorXd* g, MatrixXd* h) {
                   const double v = fi.eval(w, g, h);
                   if (g) *g *= sign;
                   if (h) *h *= sign;
                   return sign * v;
                 },
                 true};
  q.equalities.push_back(p.budget());
  q.lower = p.lower_bounds();
  q.upper = VectorXd::Constant(n, kInf);
  std::vector<VectorXd> starts{p.equal_weights()};
  if (p.short_bound() == 0.0)
    for (Index j = 0; j < n; ++j) starts.push_back(VectorXd::Unit(n, j));
  for (auto& w : dirichlet_samples(n, 4, 1)) starts.push_back(w);
  for (const auto& w : o.starts) starts.push_back(w);
  q.x0 = starts.front();
  return sign * solve_multistart(q, starts, o.nlp, o.workers).best.value;
}

CellOutcome outcome_of(const Vector2d& eps, const ScalarizationResult& r) {
  CellOutcome c;
  c.eps = eps;
  c.iterations = r.solution.iterations;
  switch (r.solution.status) {
    case SolveStatus::converged:
      c.status = CellStatus::converged;
      c.value = r.aux;
      break;
    case SolveStatus::infeasible:
      c.status = CellStatus::infeasible;
      break;
    case SolveStatus::max_iter:
      c.status = CellStatus::failed;
      break;
  }
  return c;
}

ArchiveEntry entry_of(const EpsilonGrid& grid, const Vector2d& eps, const ScalarizationResult& r) {
  ArchiveEntry e;
  e.eps = eps;
  e.weights = r.weights;
  e.image = r.image;
  e.multipliers << r.multipliers(grid.bounded[0]), r.multipliers(grid.bounded[1]);
  return e;
}

}  // namespace

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::converged:
      return "converged";
    case CellStatus::infeasible:
      return "infeasible";
    case CellStatus::failed:
      return "failed";
  }
  return "unknown";
}

VectorXd EpsilonGrid::full(const Vector2d& eps) const {
  VectorXd e = VectorXd::Zero(3);
  e(bounded[0]) = eps(0);
  e(bounded[1]) = eps(1);
  return e;
}

EpsilonGrid make_grid(const Vector2d& eps_min, const Vector2d& eps_max, std::array<int, 2> counts) {
  if (counts[0] < 1 || counts[1] < 1) throw ParameterError("epsilon grid: counts must be at least 1");
  if (!eps_min.allFinite() || !eps_max.allFinite()) throw ParameterError("epsilon grid: ranges must be finite");
  if ((eps_max.array() < eps_min.array()).any()) throw ParameterError("epsilon grid: empty range");
  EpsilonGrid g;
  g.counts = counts;
  g.eps_min = eps_min;
  g.eps_max = eps_max;
  for (int d = 0; d < 2; ++d) g.width(d) = (eps_max(d) - eps_min(d)) / counts[std::size_t(d)];
  g.centers.reserve(std::size_t(counts[0]) * std::size_t(counts[1]));
  for (int l1 = 0; l1 < counts[0]; ++l1)
    for (int l2 = 0; l2 < counts[1]; ++l2)
      g.centers.emplace_back(eps_min(0) + g.width(0) / 2.0 + l1 * g.width(0),
                             eps_min(1) + g.width(1) / 2.0 + l2 * g.width(1));
  return g;
}

EpsilonGrid build_grid(const PortfolioMop& problem, std::array<int, 2> counts, int minimized,
                       const ScalarizationOptions& options) {
  if (problem.objective_count() != 3) throw ParameterError("epsilon grid: the problem must have three objectives");
  if (minimized < 0 || minimized > 2) throw ParameterError("epsilon grid: minimized objective index out of range");
  std::array<int, 2> bounded{};
  for (int i = 0, d = 0; i < 3; ++i)
    if (i != minimized) bounded[std::size_t(d++)] = i;
  Vector2d lo, hi;
  for (int d = 0; d < 2; ++d) {
    lo(d) = extreme(problem, bounded[std::size_t(d)], 1.0, options);
    hi(d) = extreme(problem, bounded[std::size_t(d)], -1.0, options);
  }
  EpsilonGrid g = make_grid(lo, hi.cwiseMax(lo), counts);
  g.bounded = bounded;
  g.minimized = minimized;
  return g;
}

bool FrontArchive::insert(ArchiveEntry entry) {
  std::vector<long long> key(std::size_t(entry.image.size()));
  for (Index i = 0; i < entry.image.size(); ++i)
    key[std::size_t(i)] = std::llround(entry.image(i) / kQuantum);
  if (!keys_.insert(std::move(key)).second) return false;
  entries_.push_back(std::move(entry));
  return true;
}

MatrixXd FrontArchive::images() const {
  if (entries_.empty()) return MatrixXd(0, 0);
  MatrixXd out(Index(entries_.size()), entries_.front().image.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) out.row(Index(i)) = entries_[i].image.transpose();
  return out;
}

GridRun solve_grid(const PortfolioMop& problem, const EpsilonGrid& grid, const ScalarizationOptions& options) {
  const auto rows = std::size_t(grid.counts[0]);
  const auto cols = std::size_t(grid.counts[1]);
  if (grid.size() != rows * cols) throw ShapeError("epsilon grid: center count does not match the counts");
  std::vector<ScalarizationResult> results(grid.size());

  parallel_for(rows, options.workers, [&](std::size_t row) {
    ScalarizationOptions local = options;
    local.workers = 1;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t idx = row * cols + c;
      results[idx] = solve_epsilon(problem, grid.full(grid.centers[idx]), grid.minimized, local);
      if (results[idx].converged()) {
        local.starts.assign(1, results[idx].weights);
        local.default_start = false;
      }
    }
  });

  GridRun run;
  run.cells.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CellOutcome c = outcome_of(grid.centers[i], results[i]);
    run.cells.push_back(c);
    switch (c.status) {
      case CellStatus::converged:
        ++run.converged;
        run.archive.insert(entry_of(grid, grid.centers[i], results[i]));
        break;
      case CellStatus::infeasible:
        ++run.infeasible;
        break;
      case CellStatus::failed:
        ++run.failed;
        break;
    }
  }
  return run;
}

std::vector<Vector2d> refinement_points(const ArchiveEntry& center, double alpha, int k) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("refinement: alpha must be positive");
  if (k < 1) throw ParameterError("refinement: k must be at least 1");
  const double s1 = alpha / (1.0 + center.multipliers(0) * center.multipliers(0));
  const double s2 = alpha / (1.0 + center.multipliers(1) * center.multipliers(1));
  std::vector<Vector2d> pts;
  for (int i = -k; i <= k; ++i)
    for (int j = -k; j <= k; ++j)
      if (i != 0 || j != 0) pts.emplace_back(center.eps(0) + i * s1, center.eps(1) + j * s2);
  return pts;
}

RefinementRun refine(const PortfolioMop& problem, const EpsilonGrid& grid, FrontArchive& archive,
                     const RefinementRequest& request, const ScalarizationOptions& options) {
  if (request.center >= archive.size()) throw ParameterError("refinement: center is not an archive entry");
  const ArchiveEntry center = archive.entries()[request.center];
  const auto pts = refinement_points(center, request.alpha, request.k);

  std::vector<ScalarizationResult> results(pts.size());
  parallel_for(pts.size(), options.workers, [&](std::size_t i) {
    ScalarizationOptions local = options;
    local.workers = 1;
    local.starts.insert(local.starts.begin(), center.weights);
    local.default_start = false;
    results[i] = solve_epsilon(problem, grid.full(pts[i]), grid.minimized, local);
  });

  RefinementRun run;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    run.cells.push_back(outcome_of(pts[i], results[i]));
    if (results[i].converged() && archive.insert(entry_of(grid, pts[i], results[i]))) ++run.added;
  }
  bool any = false;
  for (const auto& c : run.cells) any = any || c.status == CellStatus::converged;
  if (!any) run.warning = "refinement: no neighbor of entry " + std::to_string(request.center) + " converged";
  return run;
}

std::size_t largest_gap_entry(const FrontArchive& archive, const std::set<std::size_t>& exclude) {
  const auto& e = archive.entries();
  std::size_t best = e.size();
  double best_gap = -1.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (exclude.count(i)) continue;
    double nearest = kInf;
    for (std::size_t j = 0; j < e.size(); ++j)
      if (j != i) nearest = std::min(nearest, (e[i].image - e[j].image).norm());
    if (nearest > best_gap) {
      best_gap = nearest;
      best = i;
    }
  }
  return best;
}

AdaptiveRun run_adaptive(const PortfolioMop& problem, const AdaptiveConfig& config,
                         const ScalarizationOptions& options) {
  if (config.rounds < 0) throw ParameterError("adaptive epsilon: rounds must be nonnegative");
  if (config.alpha < 0.0) throw ParameterError("adaptive epsilon: alpha must be nonnegative");
  AdaptiveRun run;
  run.grid = build_grid(problem, config.counts, config.minimized, options);
  run.initial = solve_grid(problem, run.grid, options);
  run.archive = run.initial.archive;

  double alpha = config.alpha;
  if (alpha == 0.0) alpha = 0.5 * run.grid.width.minCoeff();
  if (!(alpha > 0.0)) alpha = 1e-3;

  std::set<std::size_t> refined;
  for (int round = 0; round < config.rounds; ++round) {
    const std::size_t c = largest_gap_entry(run.archive, refined);
    if (c >= run.archive.size()) break;
    refined.insert(c);
    const RefinementRequest req{c, alpha, config.k};
    run.requests.push_back(req);
    run.refinements.push_back(refine(problem, run.grid, run.archive, req, options));
  }
  return run;
}

}  // namespace hmfront
