#pragma once

#include <cstdint>
#include <vector>

namespace knobtune {

enum class StratumPlacement { Random, Centered };

struct LHSPlan {
  std::size_t dimension = 1;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  StratumPlacement placement = StratumPlacement::Random;
};

/// Latin hypercube design: `count` points in [0,1]^dimension such that, per
/// dimension, each stratum [k/n, (k+1)/n) holds exactly one point.
/// Pure function of the plan.
std::vector<std::vector<double>> lhs_sample(const LHSPlan& plan);

}  // namespace knobtune
