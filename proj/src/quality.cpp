#include "hmfront/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmfront/error.hpp"

namespace hmfront {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

bool strictly_dominates(const VectorXd& a, const VectorXd& b, double tol) {
  if (a.size() != b.size()) throw ShapeError("dominance: points have different dimensions");
  return ((a.array() + tol) < b.array()).all();
}

std::vector<Index> nondominated_indices(const MatrixXd& points, double tol) {
  std::vector<Index> keep;
  for (Index i = 0; i < points.rows(); ++i) {
    bool dominated = false;
    for (Index j = 0; j < points.rows() && !dominated; ++j)
      dominated = j != i && ((points.row(j).array() + tol) < points.row(i).array()).all();
    if (!dominated) keep.push_back(i);
  }
  return keep;
}

MatrixXd dominance_filter(const MatrixXd& points, double tol) {
  const std::vector<Index> keep = nondominated_indices(points, tol);
  return points(keep, Eigen::all);
}

double uniformity(const MatrixXd& front) {
  if (front.rows() < 2) throw MeasureError("uniformity needs at least two points");
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < front.rows(); ++i)
    for (Index j = i + 1; j < front.rows(); ++j) best = std::min(best, (front.row(i) - front.row(j)).norm());
  return best;
}

double coverage_error(const MatrixXd& front, const MatrixXd& reference) {
  if (front.rows() == 0 || reference.rows() == 0) throw MeasureError("coverage error needs nonempty point sets");
  if (front.cols() != reference.cols()) throw ShapeError("coverage error: point dimensions differ");
  double worst = 0.0;
  for (Index r = 0; r < reference.rows(); ++r) {
    const double nearest = (front.rowwise() - reference.row(r)).rowwise().norm().minCoeff();
    worst = std::max(worst, nearest);
  }
  return worst;
}

double diameter(const MatrixXd& points) {
  double d = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    for (Index j = i + 1; j < points.rows(); ++j) d = std::max(d, (points.row(i) - points.row(j)).norm());
  return d;
}

QualityReport assess(const MatrixXd& front, const MatrixXd& reference) {
  const MatrixXd filtered = dominance_filter(front);
  QualityReport q;
  q.cardinality = filtered.rows();
  q.dominated_count = front.rows() - filtered.rows();
  q.uniformity = uniformity(filtered);
  q.coverage_error = coverage_error(filtered, reference);
  return q;
}

}  // namespace hmfront
