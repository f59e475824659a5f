#pragma once

// Seeded sampling used for multistart points. The conversions from raw
// generator output are spelled out so results do not depend on the standard
// library's distribution implementations.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hmfront {

using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal by Box-Muller.
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// One sample from the flat Dirichlet distribution on the n-simplex.
inline Eigen::VectorXd dirichlet_sample(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = -std::log(1.0 - uniform01(rng));
  return w / w.sum();
}

inline std::vector<Eigen::VectorXd> dirichlet_samples(Eigen::Index n, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(dirichlet_sample(n, rng));
  return out;
}

}  // namespace hmfront
