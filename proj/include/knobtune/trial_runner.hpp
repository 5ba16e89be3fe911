#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "knobtune/environment.hpp"
#include "knobtune/samplepool.hpp"

namespace knobtune {

/// Thrown when a run hits its configured new-trial limit (simulated kill).
class RunInterrupted : public Error {
 public:
  using Error::Error;
};

/// Result of one stage: the best configuration over {stage base, stage trials}.
struct StageOutcome {
  Configuration best;
  std::optional<double> best_fitness;
  std::optional<std::uint64_t> best_trial;  ///< absent when the base won
  std::size_t trials = 0;
  std::size_t steps_to_best = 0;            ///< 1-based position within the stage, 0 = base
};

/// Executes trials for the stages: quantizes the action, evaluates it,
/// aggregates frames and appends the sample to the pool. Trial indices run
/// from `first_trial`; indices already present in the pool are replayed from
/// it instead of re-evaluated, which makes resuming an interrupted run exact.
class TrialRunner {
 public:
  TrialRunner(Environment& env, SamplePool& pool, WorkloadSpec workload, std::uint64_t master_seed,
              std::uint64_t first_trial = 0);

  const KnobCatalog& catalog() const { return env_.catalog(); }
  SamplePool& pool() { return pool_; }
  const SamplePool& pool() const { return pool_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t next_trial() const { return cursor_; }
  std::size_t new_evaluations() const { return new_evaluations_; }

  void set_new_trial_limit(std::optional<std::size_t> limit) { limit_ = limit; }
  void set_log(std::ostream* log) { log_ = log; }
  /// Called with every normalized vector handed to run(), before quantization.
  void set_action_observer(std::function<void(std::span<const double>, Stage)> f) { observer_ = std::move(f); }

  /// Returns the recorded sample, or nullptr when the trial failed.
  const Sample* run(std::span<const double> v, Stage stage);

  /// Seed handed to the environment for a given trial.
  std::uint64_t trial_seed(std::uint64_t trial) const;

 private:
  const Sample* find(std::uint64_t trial) const;

  Environment& env_;
  SamplePool& pool_;
  WorkloadSpec workload_;
  std::uint64_t master_seed_;
  std::uint64_t cursor_;
  std::size_t new_evaluations_ = 0;
  std::optional<std::size_t> limit_;
  std::ostream* log_ = nullptr;
  std::function<void(std::span<const double>, Stage)> observer_;
};

/// Tracks the best of a stage; `offer` takes samples in trial order.
class StageTracker {
 public:
  StageTracker(const Configuration& base, std::optional<double> base_fitness);
  void offer(const Sample& sample, const KnobCatalog& catalog);
  void count_failure() { ++outcome_.trials; }
  const StageOutcome& outcome() const { return outcome_; }

 private:
  StageOutcome outcome_;
};

}  // namespace knobtune
