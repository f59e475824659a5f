#pragma once

// Adaptive epsilon-constraint driver for three objectives: two objectives are
// bounded on a regular grid of epsilon values, the third is minimized, and the
// archive is refined locally with multiplier-scaled neighborhoods.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "hmfront/problem.hpp"
#include "hmfront/scalarization.hpp"

namespace hmfront {

struct EpsilonGrid {
  std::array<int, 2> counts{1, 1};
  /// Objective indices of the two bounded objectives and the minimized one.
  std::array<int, 2> bounded{0, 1};
  int minimized = 2;
  Eigen::Vector2d eps_min = Eigen::Vector2d::Zero();
  Eigen::Vector2d eps_max = Eigen::Vector2d::Zero();
  Eigen::Vector2d width = Eigen::Vector2d::Zero();
  /// Cell centers, first bounded objective varying slowest.
  std::vector<Eigen::Vector2d> centers;

  std::size_t size() const { return centers.size(); }
  /// Full epsilon vector (one entry per objective, zero at the minimized one).
  Eigen::VectorXd full(const Eigen::Vector2d& eps) const;
};

/// Centers eps_min + L/2 + l L for l = 0..N-1, with L = (eps_max - eps_min) / N.
EpsilonGrid make_grid(const Eigen::Vector2d& eps_min, const Eigen::Vector2d& eps_max, std::array<int, 2> counts);

/// Ranges of the bounded objectives from their individual minimizations and
/// maximizations over the feasible set. Requires three objectives.
EpsilonGrid build_grid(const PortfolioMop& problem, std::array<int, 2> counts, int minimized = 2,
                       const ScalarizationOptions& options = {});

struct ArchiveEntry {
  Eigen::Vector2d eps = Eigen::Vector2d::Zero();
  Eigen::VectorXd weights;
  Eigen::VectorXd image;
  /// Multipliers of the two epsilon bounds (>= 0).
  Eigen::Vector2d multipliers = Eigen::Vector2d::Zero();
};

/// Converged epsilon solutions. Images are kept unique after rounding to a
/// 1e-9 lattice; insertion order is preserved.
class FrontArchive {
 public:
  static constexpr double kQuantum = 1e-9;

  /// Returns false when the image duplicates an archived one.
  bool insert(ArchiveEntry entry);
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// One image per row.
  Eigen::MatrixXd images() const;

 private:
  std::vector<ArchiveEntry> entries_;
  std::set<std::vector<long long>> keys_;
};

enum class CellStatus { converged, infeasible, failed };

struct CellOutcome {
  Eigen::Vector2d eps = Eigen::Vector2d::Zero();
  CellStatus status = CellStatus::failed;
  /// Optimal value of the minimized objective when converged.
  double value = 0.0;
  int iterations = 0;
};

struct GridRun {
  FrontArchive archive;
  std::vector<CellOutcome> cells;
  std::size_t converged = 0;
  std::size_t infeasible = 0;
  std::size_t failed = 0;
};

/// Solves every cell. Rows of the grid run in parallel; within a row each cell
/// starts from the previous cell's solution.
GridRun solve_grid(const PortfolioMop& problem, const EpsilonGrid& grid, const ScalarizationOptions& options = {});

struct RefinementRequest {
  std::size_t center = 0;  // index into the archive
  double alpha = 0.0;
  int k = 1;
};

/// The (2k+1)^2 - 1 neighbors eps + i a/(1+mu1^2) e1 + j a/(1+mu2^2) e2,
/// i and j in -k..k, (i, j) != (0, 0), ordered by (i, j).
std::vector<Eigen::Vector2d> refinement_points(const ArchiveEntry& center, double alpha, int k);

struct RefinementRun {
  std::vector<CellOutcome> cells;
  std::size_t added = 0;
  std::string warning;
};

/// Solves the neighborhood of one archive entry and merges converged results.
RefinementRun refine(const PortfolioMop& problem, const EpsilonGrid& grid, FrontArchive& archive,
                     const RefinementRequest& request, const ScalarizationOptions& options = {});

/// Index of the archive entry with the largest distance to its nearest image
/// neighbor, skipping `exclude`. Ties go to the lower index. Returns size()
/// when no candidate remains.
std::size_t largest_gap_entry(const FrontArchive& archive, const std::set<std::size_t>& exclude = {});

struct AdaptiveConfig {
  std::array<int, 2> counts{50, 50};
  int minimized = 2;
  /// Image-space spacing of refinement; 0 means half the smaller cell width.
  double alpha = 0.0;
  int k = 1;
  int rounds = 5;
};

struct AdaptiveRun {
  EpsilonGrid grid;
  GridRun initial;
  std::vector<RefinementRequest> requests;
  std::vector<RefinementRun> refinements;
  FrontArchive archive;
};

/// Grid solve followed by `rounds` refinements of the entry with the largest
/// nearest-neighbor gap.
AdaptiveRun run_adaptive(const PortfolioMop& problem, const AdaptiveConfig& config,
                         const ScalarizationOptions& options = {});

std::string to_string(CellStatus status);

}  // namespace hmfront
