#include "hmfront/synthetic.hpp"

#include <cmath>
#include <string>

#include "hmfront/error.hpp"
#include "hmfront/random.hpp"

namespace hmfront {

ReturnsMatrixd synthetic_returns(int assets, int periods, std::uint64_t seed, double skew_level) {
  if (assets < 1) throw ParameterError("synthetic: at least one asset is required");
  if (periods < 2) throw ParameterError("synthetic: at least two periods are required");
  if (!(skew_level >= 0.0) || !std::isfinite(skew_level))
    throw ParameterError("synthetic: skewness level must be finite and nonnegative");

  Rng rng(seed);
  const double rho = 0.3;
  Eigen::MatrixXd r(periods, assets);
  std::vector<std::string> ids;
  for (int j = 0; j < assets; ++j) ids.push_back("S" + std::to_string(j + 1));
  for (int t = 0; t < periods; ++t) {
    const double factor = standard_normal(rng);
    for (int j = 0; j < assets; ++j) {
      const double pos = assets > 1 ? static_cast<double>(j) / (assets - 1) : 0.0;
      const double mean = 0.04 + 0.08 * pos;
      const double vol = 0.10 + 0.15 * pos;
      const double noise = std::sqrt(rho) * factor + std::sqrt(1.0 - rho) * standard_normal(rng);
      const double shock = -std::log(1.0 - uniform01(rng)) - 1.0;
      const double sign = j % 2 == 0 ? 1.0 : -1.0;
      r(t, j) = mean + vol * (noise + skew_level * sign * shock);
    }
  }
  return ReturnsMatrixd(std::move(ids), std::move(r));
}

}  // namespace hmfront
