#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "knobtune/rng.hpp"
#include "knobtune/sampling.hpp"

using namespace knobtune;

namespace {

bool stratified(const std::vector<std::vector<double>>& pts, std::size_t d, std::size_t n) {
  for (std::size_t j = 0; j < d; ++j) {
    std::set<std::size_t> strata;
    for (const auto& p : pts) {
      if (p[j] < 0.0 || p[j] >= 1.0) return false;
      strata.insert(static_cast<std::size_t>(std::floor(p[j] * static_cast<double>(n))));
    }
    if (strata.size() != n) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("one point per stratum in every dimension") {
  Rng rng(2024);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng.below(300), n = 1 + rng.below(200);
    const auto pts = lhs_sample(LHSPlan{d, n, rng.next(), StratumPlacement::Random});
    REQUIRE(pts.size() == n);
    CHECK(stratified(pts, d, n));
  }
}

TEST_CASE("centered placement puts points at stratum midpoints") {
  const auto pts = lhs_sample(LHSPlan{3, 4, 9, StratumPlacement::Centered});
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> col;
    for (const auto& p : pts) col.push_back(p[j]);
    std::sort(col.begin(), col.end());
    CHECK(col == std::vector<double>{0.125, 0.375, 0.625, 0.875});
  }
}

TEST_CASE("n=1 and a 266x120 design") {
  const auto one = lhs_sample(LHSPlan{5, 1, 1});
  REQUIRE(one.size() == 1);
  for (double x : one[0]) CHECK((x >= 0.0 && x < 1.0));

  const auto big = lhs_sample(LHSPlan{266, 120, 1});
  CHECK(big.size() == 120);
  CHECK(stratified(big, 266, 120));
}

TEST_CASE("sampling is a pure function of the plan") {
  CHECK(lhs_sample(LHSPlan{10, 20, 77}) == lhs_sample(LHSPlan{10, 20, 77}));
  CHECK(lhs_sample(LHSPlan{10, 20, 77}) != lhs_sample(LHSPlan{10, 20, 78}));
}

TEST_CASE("marginals are uniform in distribution") {
  // Mean of a random-placement LHS column is within 1/(2n) of 0.5 by construction.
  const std::size_t n = 100;
  const auto pts = lhs_sample(LHSPlan{20, n, 5});
  for (std::size_t j = 0; j < 20; ++j) {
    double m = 0;
    for (const auto& p : pts) m += p[j];
    m /= static_cast<double>(n);
    CHECK(std::abs(m - 0.5) <= 0.5 / static_cast<double>(n) + 1e-12);
  }
}
