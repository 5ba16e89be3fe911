#include "knobtune/trial_runner.hpp"

#include <algorithm>

#include "knobtune/rng.hpp"

namespace knobtune {

namespace {
constexpr std::uint64_t kTrialStream = 0x747269616cULL;
}

TrialRunner::TrialRunner(Environment& env, SamplePool& pool, WorkloadSpec workload, std::uint64_t master_seed,
                         std::uint64_t first_trial)
    : env_(env), pool_(pool), workload_(std::move(workload)), master_seed_(master_seed), cursor_(first_trial) {
  workload_.validate();
  if (pool_.dimension() != env_.catalog().dimension()) throw DimensionError("trial runner: pool/catalog dimension mismatch");
  if (pool_.catalog_fingerprint() != env_.catalog().fingerprint()) {
    throw ValidationError("trial runner: pool was recorded against a different catalog");
  }
}

std::uint64_t TrialRunner::trial_seed(std::uint64_t trial) const { return derive_seed(master_seed_, kTrialStream, trial); }

const Sample* TrialRunner::find(std::uint64_t trial) const {
  const auto& s = pool_.samples();
  auto it = std::lower_bound(s.begin(), s.end(), trial,
                             [](const Sample& a, std::uint64_t t) { return a.trial_index < t; });
  return it != s.end() && it->trial_index == trial ? &*it : nullptr;
}

const Sample* TrialRunner::run(std::span<const double> v, Stage stage) {
  if (observer_) observer_(v, stage);
  const std::uint64_t trial = cursor_++;
  Configuration config = denormalize(env_.catalog(), v);
  config.normalized = normalize(env_.catalog(), config.physical);

  if (trial < pool_.next_trial_index()) {
    const Sample* recorded = find(trial);
    if (!recorded) return nullptr;  // recorded failure
    if (recorded->action != config.normalized || recorded->stage != stage) {
      throw Error("resume diverged at trial " + std::to_string(trial) + ": recorded action/stage differ");
    }
    return recorded;
  }

  if (limit_ && new_evaluations_ >= *limit_) throw RunInterrupted("new-trial limit reached before trial " + std::to_string(trial));
  ++new_evaluations_;
  const std::uint64_t seed = trial_seed(trial);
  try {
    EnvObservation obs = env_.evaluate(config, workload_, seed, "trial-" + std::to_string(trial));
    StateVector state = aggregate_frames(env_.schema(), obs.frames);
    Sample sample = Sample::make(std::move(state), config.normalized, obs.perf, stage, trial, SeedInfo{seed, false});
    sample.wall_time_s = obs.wall_time_s;
    pool_.append(std::move(sample));
    if (log_) {
      *log_ << "trial " << trial << " [" << to_string(stage) << "] fitness " << pool_.samples().back().fitness << '\n';
    }
    return &pool_.samples().back();
  } catch (const EnvironmentError& e) {
    if (log_) *log_ << "trial " << trial << " [" << to_string(stage) << "] failed: " << e.what() << '\n';
  } catch (const ValidationError& e) {
    if (log_) *log_ << "trial " << trial << " [" << to_string(stage) << "] rejected: " << e.what() << '\n';
  } catch (const DimensionError& e) {
    if (log_) *log_ << "trial " << trial << " [" << to_string(stage) << "] rejected: " << e.what() << '\n';
  }
  pool_.skip_trial_index(trial);
  return nullptr;
}

StageTracker::StageTracker(const Configuration& base, std::optional<double> base_fitness) {
  outcome_.best = base;
  outcome_.best_fitness = base_fitness;
}

void StageTracker::offer(const Sample& sample, const KnobCatalog& catalog) {
  ++outcome_.trials;
  if (!outcome_.best_fitness || sample.fitness > *outcome_.best_fitness) {
    outcome_.best = denormalize(catalog, sample.action);
    outcome_.best_fitness = sample.fitness;
    outcome_.best_trial = sample.trial_index;
    outcome_.steps_to_best = outcome_.trials;
  }
}

}  // namespace knobtune
