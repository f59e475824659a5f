#pragma once

#include <cstdint>

#include "hmfront/moments.hpp"

namespace hmfront {

/// Synthetic return panel: a one-factor Gaussian base plus an idiosyncratic
/// centered-exponential shock whose weight `skew_level` controls the
/// asymmetry. Even-indexed assets receive right-skewed shocks and odd-indexed
/// assets left-skewed ones. Means rise and volatilities grow with the asset
/// index. Level 0 gives a purely Gaussian panel.
ReturnsMatrixd synthetic_returns(int assets, int periods, std::uint64_t seed, double skew_level);

}  // namespace hmfront
