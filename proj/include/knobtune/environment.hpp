#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "knobtune/knobspace.hpp"
#include "knobtune/metrics.hpp"

namespace knobtune {

struct WorkloadSpec {
  std::string name = "default";
  double read_fraction = 0.5;
  std::int64_t threads = 32;
  double duration_s = 60.0;
  double frame_interval_s = 5.0;

  void validate() const;
  /// Number of metric frames a trial yields (one per elapsed interval).
  std::size_t frame_count() const;
  json to_json() const;
  static WorkloadSpec from_json(const json& j);
};

WorkloadSpec load_workload(const std::filesystem::path& path);

struct EnvObservation {
  std::vector<MetricFrame> frames;
  PerfResult perf;
  double wall_time_s = 0.0;
};

/// Evaluation contract: apply a configuration, run the workload, report
/// frames and performance. One in-flight evaluation per instance.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const KnobCatalog& catalog() const = 0;
  virtual const MetricSchema& schema() const = 0;

  /// Throws EnvironmentError when the trial fails; the caller decides
  /// whether to continue.
  virtual EnvObservation evaluate(const Configuration& config, const WorkloadSpec& workload, std::uint64_t seed,
                                  const std::string& trial_id) = 0;

  EnvObservation evaluate(const Configuration& config, const WorkloadSpec& workload, std::uint64_t seed) {
    return evaluate(config, workload, seed, std::to_string(seed));
  }
};

}  // namespace knobtune
