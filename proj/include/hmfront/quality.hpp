#pragma once

// Front-quality measures on image-space point sets. A point set is a matrix
// with one point per row; all measures use Euclidean distances in image
// space and assume minimization.

#include <Eigen/Dense>

#include <vector>

namespace hmfront {

/// True when a is smaller than b by more than `tol` in every coordinate.
bool strictly_dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol = 0.0);

/// Row indices of the points no other row strictly dominates, in input order.
std::vector<Eigen::Index> nondominated_indices(const Eigen::MatrixXd& points, double tol = 0.0);

/// The rows selected by nondominated_indices.
Eigen::MatrixXd dominance_filter(const Eigen::MatrixXd& points, double tol = 0.0);

/// Minimum pairwise distance. Throws MeasureError for fewer than two points.
double uniformity(const Eigen::MatrixXd& front);

/// Largest distance from a reference point to its nearest front point.
/// Throws MeasureError when either set is empty.
double coverage_error(const Eigen::MatrixXd& front, const Eigen::MatrixXd& reference);

/// Largest pairwise distance; zero for fewer than two points.
double diameter(const Eigen::MatrixXd& points);

struct QualityReport {
  double coverage_error = 0.0;
  double uniformity = 0.0;
  Eigen::Index cardinality = 0;
  Eigen::Index dominated_count = 0;
};

/// Filters `front`, then measures the filtered set against `reference`.
QualityReport assess(const Eigen::MatrixXd& front, const Eigen::MatrixXd& reference);

}  // namespace hmfront
