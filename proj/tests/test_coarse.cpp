#include "doctest.h"

#include <algorithm>
#include <set>

#include "knobtune/coarse.hpp"
#include "knobtune/errors.hpp"
#include "knobtune/rng.hpp"
#include "knobtune/sampling.hpp"
#include "support.hpp"

using namespace knobtune;
using testing::int_knob;

namespace {

const HardwareProfile kHw{12, 64ull << 30, 1ull << 40};

HintEntry suggested(std::string knob, std::vector<double> values) {
  HintEntry e;
  e.knob = std::move(knob);
  e.base = values.front();
  e.suggested_values = std::move(values);
  return e;
}

std::set<std::int64_t> ints(const std::vector<KnobValue>& vals) {
  std::set<std::int64_t> out;
  for (const auto& v : vals) out.insert(std::get<std::int64_t>(v));
  return out;
}

}  // namespace

TEST_CASE("feasible space candidates") {
  const KnobCatalog cat({int_knob("a", 10, 1000, 300), int_knob("b", 1, 64, 8)});
  const auto space = build_feasible_space({suggested("a", {100})}, cat, kHw);
  REQUIRE(space.size() == 1);
  CHECK(space.knobs[0] == 0);
  CHECK(ints(space.candidates[0]) == std::set<std::int64_t>{50, 100, 200, 300});

  // 64 doubled clamps back to 64; the duplicate disappears.
  auto top = suggested("b", {64});
  top.special_value = 0;  // below min: clamped to 1
  const auto s2 = build_feasible_space({top}, cat, kHw);
  CHECK(ints(s2.candidates[0]) == std::set<std::int64_t>{1, 8, 32, 64});
  CHECK(s2.candidates[0].size() == 4);

  const auto both = build_feasible_space({suggested("a", {100}), suggested("b", {4, 16})}, cat, kHw);
  CHECK(both.tuple_count() == 4 * 5);

  CHECK_THROWS_AS(build_feasible_space({}, cat, kHw), ValidationError);
  CHECK_THROWS_AS(build_feasible_space({suggested("zzz", {1})}, cat, kHw), ValidationError);
}

TEST_CASE("proposal picks the only unevaluated point and signals exhaustion") {
  const KnobCatalog cat({int_knob("a", 10, 100, 10), int_knob("b", 0, 1, 0)});
  FeasibleSpace one;
  one.knobs = {0};
  one.candidates = {{std::int64_t{10}, std::int64_t{100}}};
  CoarseState st;
  st.record({0}, 1.0);
  CHECK(propose_next(st, one, cat, 1) == std::optional<CandidateTuple>(CandidateTuple{1}));
  st.record({1}, 2.0);
  CHECK_FALSE(propose_next(st, one, cat, 1).has_value());

  FeasibleSpace square;
  square.knobs = {0, 1};
  square.candidates = {{std::int64_t{10}, std::int64_t{100}}, {std::int64_t{0}, std::int64_t{1}}};
  CoarseState s2;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(propose_next(s2, square, cat, 9).has_value());
      s2.record({i, j}, static_cast<double>(i + j));
    }
  CHECK_FALSE(propose_next(s2, square, cat, 9).has_value());
  CHECK(s2.incumbent == std::optional<CandidateTuple>(CandidateTuple{1, 1}));
}

TEST_CASE("with kappa 0 and an exact surrogate the true best unevaluated tuple is proposed") {
  std::vector<KnobSpec> knobs;
  for (int k = 0; k < 3; ++k) knobs.push_back(int_knob("k" + std::to_string(k), 0, 100, 50));
  const KnobCatalog cat(knobs);
  FeasibleSpace space;
  for (std::size_t k = 0; k < 3; ++k) {
    space.knobs.push_back(k);
    space.candidates.push_back({});
    for (std::int64_t v = 0; v <= 100; v += 20) space.candidates.back().push_back(v);
  }
  auto truth = [&](const CandidateTuple& t) {
    const auto x = tuple_features(space, t, cat);
    return -((x[0] - 0.4) * (x[0] - 0.4) + 2.0 * (x[1] - 0.6) * (x[1] - 0.6) + 0.5 * (x[2] - 0.2) * (x[2] - 0.2));
  };
  std::vector<CandidateTuple> all;
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b)
      for (std::size_t c = 0; c < 6; ++c) all.push_back({a, b, c});

  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    // Surrogate fitted on the whole truth table: an exact interpolator.
    Eigen::MatrixXd X(static_cast<Eigen::Index>(all.size()), 3);
    std::vector<double> y;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto x = tuple_features(space, all[i], cat);
      for (Eigen::Index k = 0; k < 3; ++k) X(static_cast<Eigen::Index>(i), k) = x[static_cast<std::size_t>(k)];
      y.push_back(truth(all[i]));
    }
    CoarseState st;
    ForestSpec fs;
    fs.n_trees = 3;
    fs.bootstrap = false;
    st.surrogate = forest_fit(fs, X, y);
    for (int i = 0; i < 40; ++i) {
      const auto& t = all[rng.below(all.size())];
      st.record(t, truth(t));
    }
    const CandidateTuple* want = nullptr;
    for (const auto& t : all)
      if (!st.evaluated(t) && (!want || truth(t) > truth(*want))) want = &t;
    CoarseOptions opt;
    opt.kappa = 0.0;
    const auto got = propose_next(st, space, cat, rng.next(), opt);
    REQUIRE(got.has_value());
    CHECK(truth(*got) == truth(*want));
    CHECK_FALSE(st.evaluated(*got));
  }
}

namespace {

struct Bench {
  SyntheticEnvironment env{testing::synthetic_model()};
  SamplePool pool{env.catalog().fingerprint(), env.catalog().dimension(), env.spec().hardware};
  TrialRunner runner;
  FeasibleSpace space;

  explicit Bench(std::uint64_t seed) : runner(env, pool, testing::workload(), seed) {
    space = build_feasible_space(load_hints(testing::source_path("hints/synthetic_demo.json"), env.catalog()),
                                 env.catalog(), env.spec().hardware);
  }

  // A small stage-1 style design, trust-clipped around the defaults.
  double lhs_best(std::size_t n, std::uint64_t seed) {
    const TrustRegion region{default_configuration(env.catalog()).normalized, 0.05};
    for (const auto& v : lhs_sample({env.catalog().dimension(), n, seed})) runner.run(clip_to_trust_region(region, v), Stage::Lhs);
    return pool.best_by_fitness().fitness;
  }
};

}  // namespace

TEST_CASE("coarse trials use candidate values only and never repeat") {
  Bench b(5);
  const auto base = default_configuration(b.env.catalog());
  const auto out = coarse_tune(b.runner, b.space, 50, base, std::nullopt, 11);
  CHECK(out.trials == 50);
  REQUIRE(b.pool.size() == 50);
  std::set<std::vector<double>> seen;
  double incumbent = -1.0;
  for (const auto& s : b.pool.samples()) {
    CHECK(s.stage == Stage::Coarse);
    CHECK(seen.insert(s.action).second);
    const auto cfg = denormalize(b.env.catalog(), s.action);
    std::set<std::size_t> hinted(b.space.knobs.begin(), b.space.knobs.end());
    for (std::size_t k = 0; k < b.space.size(); ++k) {
      const auto& name = b.env.catalog()[b.space.knobs[k]].name;
      const auto& cands = b.space.candidates[k];
      CHECK(std::find(cands.begin(), cands.end(), cfg.physical.at(name)) != cands.end());
    }
    for (std::size_t i = 0; i < b.env.catalog().dimension(); ++i) {
      if (!hinted.contains(i)) CHECK(s.action[i] == base.normalized[i]);
    }
    CHECK(std::max(incumbent, s.fitness) >= incumbent);
    incumbent = std::max(incumbent, s.fitness);
  }
  CHECK(out.best_fitness == incumbent);
}

TEST_CASE("budget one runs exactly one seed trial") {
  Bench b(6);
  const auto out = coarse_tune(b.runner, b.space, 1, default_configuration(b.env.catalog()), std::nullopt, 2);
  CHECK(out.trials == 1);
  CHECK(b.pool.size() == 1);
  CHECK_THROWS_AS(coarse_tune(b.runner, b.space, 0, default_configuration(b.env.catalog()), std::nullopt, 2),
                  ValidationError);
}

TEST_CASE("same seed gives the same trial sequence") {
  Bench a(7), b(7);
  const auto base = default_configuration(a.env.catalog());
  coarse_tune(a.runner, a.space, 20, base, std::nullopt, 4);
  coarse_tune(b.runner, b.space, 20, base, std::nullopt, 4);
  REQUIRE(a.pool.size() == b.pool.size());
  for (std::size_t i = 0; i < a.pool.size(); ++i) CHECK(a.pool.samples()[i].action == b.pool.samples()[i].action);
}

TEST_CASE("coarse stage improves on a stage-1 design") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Bench b(seed);
    const double lhs = b.lhs_best(60, seed);
    const auto& start = b.pool.best_by_fitness();
    const auto base = denormalize(b.env.catalog(), start.action);
    const std::size_t before = b.pool.size();
    const auto out = coarse_tune(b.runner, b.space, 50, base, start.fitness, seed);
    double stage_best = 0.0;
    for (std::size_t i = before; i < b.pool.size(); ++i) stage_best = std::max(stage_best, b.pool.samples()[i].fitness);
    CHECK(stage_best >= lhs);
    CHECK(*out.best_fitness == std::max(lhs, stage_best));
  }
}
