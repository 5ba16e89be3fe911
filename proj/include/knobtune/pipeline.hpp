#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "knobtune/coarse.hpp"
#include "knobtune/environment.hpp"
#include "knobtune/forest.hpp"
#include "knobtune/hints.hpp"
#include "knobtune/pca.hpp"
#include "knobtune/samplepool.hpp"
#include "knobtune/td3.hpp"
#include "knobtune/trial_runner.hpp"

namespace knobtune {

enum class Stage2Backend { Db, Gp };

std::string to_string(Stage2Backend b);
Stage2Backend parse_backend(const std::string& s);

/// Everything needed to (re)run a tuning session. Stored as plan.json in the
/// run directory so that --resume needs nothing else.
struct RunPlan {
  std::string catalog;
  std::string schema;
  std::string env;  ///< "synthetic:<spec.json>" or "driver:<command>"
  std::string workload;
  std::string hardware;
  std::optional<std::string> hints;
  Stage2Backend backend = Stage2Backend::Db;
  std::size_t budget_lhs = 120;
  std::optional<std::size_t> budget_stage2;  ///< default 5 (db) or 50 (gp)
  std::size_t budget_td3 = 30;
  double trust_ratio = 0.05;
  std::size_t topk = 20;
  PcaTarget pca = PcaTarget::variance(0.95);
  std::uint64_t seed = 0;
  std::string out;
  /// Set for semi-transfer runs: the source run directory and the first
  /// trial index of the new run.
  std::optional<std::string> transfer_from;
  std::uint64_t first_trial = 0;

  std::size_t stage2_budget() const;
  void validate() const;
  json to_json() const;
  static RunPlan from_json(const json& j);
};

std::unique_ptr<Environment> make_environment(const std::string& env_spec, const KnobCatalog& catalog,
                                              const MetricSchema& schema, const HardwareProfile& hardware);

/// Loaded inputs of a plan.
struct RunContext {
  KnobCatalog catalog;
  MetricSchema schema;
  WorkloadSpec workload;
  HardwareProfile hardware;
  std::unique_ptr<Environment> env;
  std::vector<HintEntry> hints;
};

RunContext open_context(const RunPlan& plan);

struct RunOptions {
  bool resume = false;
  std::optional<std::size_t> new_trial_limit;  ///< simulated kill after this many new evaluations
  std::ostream* log = nullptr;
};

/// Stage 1: LHS points trust-clipped around the catalog defaults.
StageOutcome run_stage1(const RunPlan& plan, TrialRunner& runner);

/// Stage 2 from the best sample recorded before the stage starts.
StageOutcome run_stage2(const RunPlan& plan, TrialRunner& runner, const std::vector<HintEntry>& hints,
                        const HardwareProfile& hardware, std::size_t budget);

/// Reduced space for Stage 3, fitted on Stage-1 samples.
struct ReducedSpace {
  ForestModel forest;
  std::vector<std::size_t> topk;
  PCAModel pca;
};

ReducedSpace fit_reduced_space(const RunPlan& plan, const SamplePool& pool, const KnobCatalog& catalog,
                               bool include_stale);

struct Stage3Result {
  StageOutcome outcome;
  ReducedSpace space;
  std::optional<TD3Agent> agent;
};

Stage3Result run_stage3(const RunPlan& plan, TrialRunner& runner, std::size_t budget, bool include_stale);

/// Full three-stage session. Writes the run directory and returns report.json's content.
json run_tune(const RunPlan& plan, const RunOptions& options = {});

/// Reuses an earlier run on new hardware (and optionally a new catalog):
/// migrates its pool, re-evaluates the migrated best, then runs the hint
/// stage and TD3. `plan.transfer_from` names the source run directory.
json semi_transfer(const RunPlan& plan, const RunOptions& options = {});

/// Writes report.json and series.csv from the run directory's files alone.
json emit_report(const std::filesystem::path& run_dir);

/// Refits RF and PCA on every sample in the pool; writes models/refit_*.json.
json refit_models(const std::filesystem::path& run_dir);

/// Plan defaults for a transfer: db backend, 0 + 15 + 15 trials.
RunPlan transfer_plan_defaults();

}  // namespace knobtune
