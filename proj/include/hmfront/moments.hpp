#pragma once

// Sample moment tensors of asset returns and the portfolio-level statistics
// obtained by contracting them with a weight vector.
//
// All central moments use divisor T (population convention) so that the
// second, third and fourth moments are mutually consistent. Skewness and
// kurtosis are the raw central moments w'M3(w x w) and w'M4(w x w x w); they
// are never standardized by powers of the variance.
//
// Tensor layout: m3 is n x n^2 and m4 is n x n^3, column-major, with the
// column index of m3(i, j*n + k) and m4(i, j*n^2 + k*n + l) matching the
// ordering of the Kronecker products w x w and w x w x w.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hmfront/error.hpp"

namespace hmfront {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Kronecker product of two column vectors, a x b with a varying slowest.
template <typename DerivedA, typename DerivedB>
VectorX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  VectorX<typename DerivedA::Scalar> out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// T x n matrix of per-period simple returns with asset identifiers.
template <typename Scalar>
class ReturnsMatrix {
 public:
  ReturnsMatrix(std::vector<std::string> assets, MatrixX<Scalar> observations)
      : assets_(std::move(assets)), observations_(std::move(observations)) {
    if (static_cast<Index>(assets_.size()) != observations_.cols())
      throw ShapeError("returns: " + std::to_string(assets_.size()) + " asset identifiers for " +
                       std::to_string(observations_.cols()) + " columns");
    if (observations_.cols() < 1) throw DataError("returns: at least one asset is required");
    if (observations_.rows() < 2)
      throw InsufficientDataError("returns: at least 2 observations are required, got " +
                                  std::to_string(observations_.rows()));
    std::unordered_set<std::string> seen;
    for (const auto& id : assets_)
      if (!seen.insert(id).second) throw DataError("returns: duplicate asset identifier '" + id + "'");
    for (Index t = 0; t < observations_.rows(); ++t)
      for (Index j = 0; j < observations_.cols(); ++j)
        if (!std::isfinite(static_cast<double>(observations_(t, j))))
          throw DataError("returns: non-finite entry at row " + std::to_string(t + 1) + ", column " +
                          std::to_string(j + 1) + " (" + assets_[static_cast<std::size_t>(j)] + ")");
  }

  const std::vector<std::string>& assets() const { return assets_; }
  const MatrixX<Scalar>& observations() const { return observations_; }
  Index periods() const { return observations_.rows(); }
  Index asset_count() const { return observations_.cols(); }

 private:
  std::vector<std::string> assets_;
  MatrixX<Scalar> observations_;
};

/// Immutable first-to-fourth order sample moments of an asset universe.
template <typename Scalar>
class MomentSet {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  MomentSet(Vector mu, Matrix sigma, Matrix m3, Matrix m4, Index periods)
      : mu_(std::move(mu)), sigma_(std::move(sigma)), m3_(std::move(m3)), m4_(std::move(m4)),
        periods_(periods) {
    const Index n = mu_.size();
    if (n < 1) throw ShapeError("moments: empty mean vector");
    if (sigma_.rows() != n || sigma_.cols() != n) throw ShapeError("moments: covariance must be n x n");
    if (m3_.rows() != n || m3_.cols() != n * n) throw ShapeError("moments: coskewness must be n x n^2");
    if (m4_.rows() != n || m4_.cols() != n * n * n)
      throw ShapeError("moments: cokurtosis must be n x n^3");
  }

  const Vector& mu() const { return mu_; }
  const Matrix& sigma() const { return sigma_; }
  const Matrix& m3() const { return m3_; }
  const Matrix& m4() const { return m4_; }
  Index periods() const { return periods_; }
  Index assets() const { return mu_.size(); }

  /// Rescales as if every return had been multiplied by c.
  MomentSet scaled(Scalar c) const {
    return MomentSet(mu_ * c, sigma_ * (c * c), m3_ * (c * c * c), m4_ * (c * c * c * c), periods_);
  }

 private:
  Vector mu_;
  Matrix sigma_;
  Matrix m3_;
  Matrix m4_;
  Index periods_;
};

using MomentSetd = MomentSet<double>;
using ReturnsMatrixd = ReturnsMatrix<double>;

/// (mean, variance, skewness, kurtosis) of one portfolio, natural senses.
template <typename Scalar>
struct ObjectiveVector {
  Scalar mean{};
  Scalar variance{};
  Scalar skewness{};
  Scalar kurtosis{};

  Scalar operator[](int k) const {
    switch (k) {
      case 0: return mean;
      case 1: return variance;
      case 2: return skewness;
      default: return kurtosis;
    }
  }
};

using ObjectiveVectord = ObjectiveVector<double>;

/// Gradients and Hessians of the four portfolio statistics.
template <typename Scalar>
struct StatDerivatives {
  std::array<VectorX<Scalar>, 4> gradient;
  std::array<MatrixX<Scalar>, 4> hessian;
};

template <typename Scalar>
MomentSet<Scalar> compute_moments(const ReturnsMatrix<Scalar>& returns) {
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  const Matrix& r = returns.observations();
  const Index T = r.rows();
  const Index n = r.cols();
  const Scalar inv_t = Scalar(1) / static_cast<Scalar>(T);

  const Vector mu = r.colwise().mean().transpose();
  const Matrix x = r.rowwise() - mu.transpose();

  // Each distinct index tuple is summed once and copied to all permutations
  // so the tensors are exactly symmetric.
  Matrix sigma(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      const Scalar v = x.col(i).dot(x.col(j)) * inv_t;
      sigma(i, j) = v;
      sigma(j, i) = v;
    }

  Matrix m3(n, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      const Vector xij = x.col(i).cwiseProduct(x.col(j));
      for (Index k = j; k < n; ++k) {
        const Scalar v = xij.dot(x.col(k)) * inv_t;
        const std::array<Index, 3> idx{i, j, k};
        std::array<Index, 3> p = idx;
        do {
          m3(p[0], p[1] * n + p[2]) = v;
        } while (std::next_permutation(p.begin(), p.end()));
      }
    }

  Matrix m4(n, n * n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      const Vector xij = x.col(i).cwiseProduct(x.col(j));
      for (Index k = j; k < n; ++k) {
        const Vector xijk = xij.cwiseProduct(x.col(k));
        for (Index l = k; l < n; ++l) {
          const Scalar v = xijk.dot(x.col(l)) * inv_t;
          std::array<Index, 4> p{i, j, k, l};
          do {
            m4(p[0], (p[1] * n + p[2]) * n + p[3]) = v;
          } while (std::next_permutation(p.begin(), p.end()));
        }
      }
    }

  return MomentSet<Scalar>(mu, std::move(sigma), std::move(m3), std::move(m4), T);
}

namespace detail {
template <typename Scalar, typename Derived>
void check_weights(const Eigen::MatrixBase<Derived>& w, const MomentSet<Scalar>& m) {
  if (w.size() != m.assets())
    throw ShapeError("weights of length " + std::to_string(w.size()) + " for " +
                     std::to_string(m.assets()) + " assets");
}
}  // namespace detail

template <typename Scalar, typename Derived>
ObjectiveVector<Scalar> portfolio_stats(const Eigen::MatrixBase<Derived>& w, const MomentSet<Scalar>& m) {
  detail::check_weights(w, m);
  const VectorX<Scalar> ww = kron(w, w);
  ObjectiveVector<Scalar> out;
  out.mean = w.dot(m.mu());
  out.variance = w.dot(m.sigma() * w);
  out.skewness = w.dot(m.m3() * ww);
  out.kurtosis = w.dot(m.m4() * kron(w, ww));
  return out;
}

/// Analytic first and second derivatives of the four statistics at w.
template <typename Scalar, typename Derived>
StatDerivatives<Scalar> stats_gradients(const Eigen::MatrixBase<Derived>& w, const MomentSet<Scalar>& m) {
  detail::check_weights(w, m);
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  const Index n = m.assets();
  const Vector ww = kron(w, w);

  StatDerivatives<Scalar> d;
  d.gradient[0] = m.mu();
  d.gradient[1] = Scalar(2) * (m.sigma() * w);
  d.gradient[2] = Scalar(3) * (m.m3() * ww);
  d.gradient[3] = Scalar(4) * (m.m4() * kron(w, ww));

  d.hessian[0] = Matrix::Zero(n, n);
  d.hessian[1] = Scalar(2) * m.sigma();
  // Column-major reinterpretation: m3 as (n*n) x n and m4 as (n*n) x (n*n).
  Eigen::Map<const Matrix> m3_fold(m.m3().data(), n * n, n);
  Eigen::Map<const Matrix> m4_fold(m.m4().data(), n * n, n * n);
  const Vector h3 = m3_fold * w;
  const Vector h4 = m4_fold * ww;
  d.hessian[2] = Scalar(6) * Eigen::Map<const Matrix>(h3.data(), n, n);
  d.hessian[3] = Scalar(12) * Eigen::Map<const Matrix>(h4.data(), n, n);
  return d;
}

/// Evaluates portfolio statistics directly from the centered observations in
/// O(T n) per call. Memory stays O(T n), so this serves universes too large for
/// the n^4 cokurtosis tensor.
template <typename Scalar>
class ObservationMoments {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  explicit ObservationMoments(const ReturnsMatrix<Scalar>& returns)
      : mu_(returns.observations().colwise().mean().transpose()),
        centered_(returns.observations().rowwise() - mu_.transpose()) {}

  Index assets() const { return mu_.size(); }
  const Vector& mu() const { return mu_; }

  template <typename Derived>
  ObjectiveVector<Scalar> stats(const Eigen::MatrixBase<Derived>& w) const {
    check(w);
    const Vector p = centered_ * w;
    const Vector p2 = p.cwiseProduct(p);
    ObjectiveVector<Scalar> out;
    out.mean = w.dot(mu_);
    out.variance = p2.mean();
    out.skewness = p2.dot(p) / static_cast<Scalar>(p.size());
    out.kurtosis = p2.squaredNorm() / static_cast<Scalar>(p.size());
    return out;
  }

  template <typename Derived>
  StatDerivatives<Scalar> derivatives(const Eigen::MatrixBase<Derived>& w) const {
    check(w);
    const Scalar inv_t = Scalar(1) / static_cast<Scalar>(centered_.rows());
    const Vector p = centered_ * w;
    const Vector p2 = p.cwiseProduct(p);
    StatDerivatives<Scalar> d;
    d.gradient[0] = mu_;
    d.gradient[1] = Scalar(2) * inv_t * (centered_.transpose() * p);
    d.gradient[2] = Scalar(3) * inv_t * (centered_.transpose() * p2);
    d.gradient[3] = Scalar(4) * inv_t * (centered_.transpose() * p2.cwiseProduct(p));
    d.hessian[0] = Matrix::Zero(assets(), assets());
    d.hessian[1] = Scalar(2) * inv_t * (centered_.transpose() * centered_);
    d.hessian[2] = Scalar(6) * inv_t * (centered_.transpose() * p.asDiagonal() * centered_);
    d.hessian[3] = Scalar(12) * inv_t * (centered_.transpose() * p2.asDiagonal() * centered_);
    return d;
  }

 private:
  template <typename Derived>
  void check(const Eigen::MatrixBase<Derived>& w) const {
    if (w.size() != assets())
      throw ShapeError("weights of length " + std::to_string(w.size()) + " for " +
                       std::to_string(assets()) + " assets");
  }

  Vector mu_;
  Matrix centered_;
};

/// Parses returns CSV: header row of asset identifiers, then one row of
/// decimal returns per period. Blank lines are ignored.
ReturnsMatrixd read_returns_csv(std::istream& in);
ReturnsMatrixd read_returns_csv(const std::string& path);

}  // namespace hmfront
