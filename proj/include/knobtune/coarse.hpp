#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "knobtune/forest.hpp"
#include "knobtune/hints.hpp"
#include "knobtune/trial_runner.hpp"

namespace knobtune {

/// Small discrete candidate set per knob, built from structured hints.
struct FeasibleSpace {
  std::vector<std::size_t> knobs;                     ///< catalog indices
  std::vector<std::vector<KnobValue>> candidates;     ///< ascending, deduplicated

  std::size_t size() const { return knobs.size(); }
  /// Number of candidate tuples, saturating at SIZE_MAX.
  std::size_t tuple_count() const;
};

using CandidateTuple = std::vector<std::size_t>;

/// Per knob: resolved suggested values (the base when none are listed), their
/// 0.5x and 2x variants, the special value and the catalog default, all
/// clamped, quantized and deduplicated.
FeasibleSpace build_feasible_space(const std::vector<HintEntry>& entries, const KnobCatalog& catalog,
                                   const HardwareProfile& hw);

Configuration tuple_configuration(const FeasibleSpace& space, const CandidateTuple& tuple, const Configuration& base,
                                  const KnobCatalog& catalog);

/// Surrogate features of a tuple: the normalized coordinate of each value.
std::vector<double> tuple_features(const FeasibleSpace& space, const CandidateTuple& tuple, const KnobCatalog& catalog);

struct CoarseOptions {
  std::size_t seed_trials = 5;
  double kappa = 1.0;
  std::size_t candidate_pool = 1000;
  ForestSpec forest{100, std::nullopt, 1, FeatureRule::Sqrt, true, 0};
};

struct CoarseState {
  std::map<CandidateTuple, double> history;   ///< successful evaluations
  std::set<CandidateTuple> failed;
  std::optional<ForestModel> surrogate;
  std::size_t iteration = 0;
  std::optional<CandidateTuple> incumbent;
  double incumbent_fitness = 0.0;

  bool evaluated(const CandidateTuple& t) const { return history.contains(t) || failed.contains(t); }
  void record(const CandidateTuple& t, double fitness);
  void record_failure(const CandidateTuple& t) { failed.insert(t); ++iteration; }
  /// Refits the surrogate on the history (no-op below 2 points).
  void refit(const FeasibleSpace& space, const KnobCatalog& catalog, const ForestSpec& spec);
};

/// Upper-confidence proposal: scores unevaluated tuples by mean + kappa *
/// tree spread and returns the best. Without a fitted surrogate, returns a
/// random unevaluated tuple. nullopt means the space is exhausted.
std::optional<CandidateTuple> propose_next(const CoarseState& state, const FeasibleSpace& space,
                                           const KnobCatalog& catalog, std::uint64_t seed,
                                           const CoarseOptions& options = {});

StageOutcome coarse_tune(TrialRunner& runner, const FeasibleSpace& space, std::size_t budget, const Configuration& base,
                         std::optional<double> base_fitness, std::uint64_t seed, const CoarseOptions& options = {});

}  // namespace knobtune
