#include "knobtune/sampling.hpp"

#include <cmath>
#include <numeric>

#include "knobtune/errors.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

std::vector<std::vector<double>> lhs_sample(const LHSPlan& plan) {
  if (plan.dimension == 0 || plan.count == 0) throw ValidationError("LHS plan needs dimension >= 1 and count >= 1");
  const std::size_t n = plan.count;
  const double width = 1.0 / static_cast<double>(n);
  Rng rng(plan.seed);

  std::vector<std::vector<double>> design(n, std::vector<double>(plan.dimension));
  std::vector<std::size_t> strata(n);
  for (std::size_t j = 0; j < plan.dimension; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata);
    for (std::size_t i = 0; i < n; ++i) {
      const double offset = plan.placement == StratumPlacement::Centered ? 0.5 : rng.uniform();
      const auto k = static_cast<double>(strata[i]);
      double x = (k + offset) * width;
      // Rounding can push a point across a stratum edge; nudge it back.
      while (std::floor(x * static_cast<double>(n)) > k) x = std::nextafter(x, 0.0);
      while (std::floor(x * static_cast<double>(n)) < k) x = std::nextafter(x, 1.0);
      design[i][j] = x;
    }
  }
  return design;
}

}  // namespace knobtune
