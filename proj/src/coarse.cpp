#include "knobtune/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "knobtune/sampling.hpp"

namespace knobtune {

std::size_t FeasibleSpace::tuple_count() const {
  std::size_t total = 1;
  for (const auto& c : candidates) {
    if (c.empty()) return 0;
    if (total > std::numeric_limits<std::size_t>::max() / c.size()) return std::numeric_limits<std::size_t>::max();
    total *= c.size();
  }
  return total;
}

FeasibleSpace build_feasible_space(const std::vector<HintEntry>& entries, const KnobCatalog& catalog,
                                   const HardwareProfile& hw) {
  if (entries.empty()) throw ValidationError("build_feasible_space: no hint entries");
  std::map<std::size_t, std::vector<double>> values;
  for (const auto& e : entries) {
    auto idx = catalog.index_of(e.knob);
    if (!idx) throw ValidationError("build_feasible_space: unknown knob '" + e.knob + "'");
    const KnobSpec& knob = catalog[*idx];
    auto& vals = values[*idx];
    const std::vector<double> suggested = e.suggested_values.empty() ? std::vector<double>{e.base} : e.suggested_values;
    for (double s : suggested) {
      for (double scale : {0.5, 1.0, 2.0}) vals.push_back(knob.numeric(resolve_amount(e, s * scale, hw, catalog)));
    }
    if (e.special_value) vals.push_back(knob.numeric(knob.clamp_numeric(*e.special_value)));
    vals.push_back(knob.numeric(knob.default_value));
  }

  FeasibleSpace space;
  for (auto& [idx, vals] : values) {
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::vector<KnobValue> cands;
    for (double v : vals) cands.push_back(catalog[idx].clamp_numeric(v));
    space.knobs.push_back(idx);
    space.candidates.push_back(std::move(cands));
  }
  return space;
}

Configuration tuple_configuration(const FeasibleSpace& space, const CandidateTuple& tuple, const Configuration& base,
                                  const KnobCatalog& catalog) {
  if (tuple.size() != space.size()) throw DimensionError("tuple_configuration: tuple size mismatch");
  PhysicalConfig physical = base.physical;
  for (std::size_t k = 0; k < tuple.size(); ++k) physical[catalog[space.knobs[k]].name] = space.candidates[k].at(tuple[k]);
  return from_physical(catalog, physical);
}

std::vector<double> tuple_features(const FeasibleSpace& space, const CandidateTuple& tuple, const KnobCatalog& catalog) {
  std::vector<double> x(tuple.size());
  for (std::size_t k = 0; k < tuple.size(); ++k) x[k] = catalog[space.knobs[k]].to_unit(space.candidates[k].at(tuple[k]));
  return x;
}

void CoarseState::record(const CandidateTuple& t, double fitness) {
  history[t] = fitness;
  ++iteration;
  if (!incumbent || fitness > incumbent_fitness) {
    incumbent = t;
    incumbent_fitness = fitness;
  }
}

void CoarseState::refit(const FeasibleSpace& space, const KnobCatalog& catalog, const ForestSpec& spec) {
  if (history.size() < 2) {
    surrogate.reset();
    return;
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(history.size()), static_cast<Eigen::Index>(space.size()));
  std::vector<double> y;
  Eigen::Index row = 0;
  for (const auto& [tuple, f] : history) {
    const auto x = tuple_features(space, tuple, catalog);
    for (std::size_t k = 0; k < x.size(); ++k) X(row, static_cast<Eigen::Index>(k)) = x[k];
    y.push_back(f);
    ++row;
  }
  surrogate = forest_fit(spec, X, y);
}

namespace {

CandidateTuple decode(std::size_t flat, const FeasibleSpace& space) {
  CandidateTuple t(space.size());
  for (std::size_t k = space.size(); k-- > 0;) {
    t[k] = flat % space.candidates[k].size();
    flat /= space.candidates[k].size();
  }
  return t;
}

CandidateTuple random_tuple(const FeasibleSpace& space, Rng& rng) {
  CandidateTuple t(space.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.below(space.candidates[k].size());
  return t;
}

std::vector<CandidateTuple> unevaluated_pool(const CoarseState& state, const FeasibleSpace& space, Rng& rng,
                                             std::size_t m) {
  std::vector<CandidateTuple> pool;
  const std::size_t total = space.tuple_count();
  if (total <= m) {
    for (std::size_t f = 0; f < total; ++f) {
      auto t = decode(f, space);
      if (!state.evaluated(t)) pool.push_back(std::move(t));
    }
    return pool;
  }
  std::set<CandidateTuple> seen;
  for (std::size_t attempt = 0; attempt < 20 * m && pool.size() < m; ++attempt) {
    auto t = random_tuple(space, rng);
    if (state.evaluated(t) || !seen.insert(t).second) continue;
    pool.push_back(std::move(t));
  }
  return pool;
}

}  // namespace

std::optional<CandidateTuple> propose_next(const CoarseState& state, const FeasibleSpace& space,
                                           const KnobCatalog& catalog, std::uint64_t seed,
                                           const CoarseOptions& options) {
  Rng rng(seed);
  const auto pool = unevaluated_pool(state, space, rng, options.candidate_pool);
  if (pool.empty()) return std::nullopt;
  if (!state.surrogate) return pool[rng.below(pool.size())];

  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto p = forest_predict(*state.surrogate, tuple_features(space, pool[i], catalog));
    const double score = p.mean + options.kappa * p.spread;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return pool[best];
}

StageOutcome coarse_tune(TrialRunner& runner, const FeasibleSpace& space, std::size_t budget, const Configuration& base,
                         std::optional<double> base_fitness, std::uint64_t seed, const CoarseOptions& options) {
  if (budget < 1) throw ValidationError("coarse_tune: budget must be >= 1");
  if (space.size() == 0 || space.tuple_count() == 0) throw ValidationError("coarse_tune: empty feasible space");
  const KnobCatalog& catalog = runner.catalog();
  CoarseState state;
  StageTracker tracker(base, base_fitness);

  auto evaluate = [&](const CandidateTuple& t) {
    const Configuration config = tuple_configuration(space, t, base, catalog);
    const Sample* sample = runner.run(config.normalized, Stage::Coarse);
    if (!sample) {
      state.record_failure(t);
      tracker.count_failure();
      return;
    }
    state.record(t, sample->fitness);
    tracker.offer(*sample, catalog);
  };

  // Stratified seed design over each knob's candidate index range.
  const std::size_t n_seed = std::min(budget, options.seed_trials);
  const auto design = lhs_sample({space.size(), n_seed, derive_seed(seed, 0x73656564ULL), StratumPlacement::Random});
  std::size_t used = 0;
  for (const auto& u : design) {
    CandidateTuple t(space.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      const std::size_t m = space.candidates[k].size();
      t[k] = std::min(m - 1, static_cast<std::size_t>(std::floor(u[k] * static_cast<double>(m))));
    }
    if (state.evaluated(t)) {
      auto alt = propose_next(state, space, catalog, derive_seed(seed, 0x616c74ULL, used), options);
      if (!alt) break;
      t = *alt;
    }
    evaluate(t);
    ++used;
  }

  ForestSpec forest = options.forest;
  while (used < budget) {
    forest.seed = derive_seed(seed, 0x726600ULL, used);
    state.refit(space, catalog, forest);
    auto next = propose_next(state, space, catalog, derive_seed(seed, 0x70726f70ULL, used), options);
    if (!next) break;  // space exhausted
    evaluate(*next);
    ++used;
  }
  return tracker.outcome();
}

}  // namespace knobtune
