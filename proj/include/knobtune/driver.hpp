#pragma once

#include <chrono>
#include <string>
#include <sys/types.h>

#include "knobtune/environment.hpp"

namespace knobtune {

/// Request line sent to an external driver.
json make_evaluate_request(const Configuration& config, const WorkloadSpec& workload, const std::string& trial_id);

/// Parses a driver response; throws EnvironmentError on {"error": ...} or a
/// protocol violation (missing fields, wrong frame width, invalid perf).
EnvObservation parse_evaluate_response(const json& response, const MetricSchema& schema);

/// Environment backed by an external process speaking newline-delimited JSON
/// on stdin/stdout. The process is started lazily and restarted after a
/// timeout or protocol violation.
class DriverEnvironment final : public Environment {
 public:
  DriverEnvironment(KnobCatalog catalog, MetricSchema schema, std::string command,
                    std::chrono::milliseconds timeout = std::chrono::seconds(600));
  ~DriverEnvironment() override;

  DriverEnvironment(const DriverEnvironment&) = delete;
  DriverEnvironment& operator=(const DriverEnvironment&) = delete;

  const KnobCatalog& catalog() const override { return catalog_; }
  const MetricSchema& schema() const override { return schema_; }

  using Environment::evaluate;
  EnvObservation evaluate(const Configuration& config, const WorkloadSpec& workload, std::uint64_t seed,
                          const std::string& trial_id) override;

  bool running() const { return pid_ > 0; }

 private:
  void start();
  void stop();
  std::string read_line(std::chrono::steady_clock::time_point deadline);

  KnobCatalog catalog_;
  MetricSchema schema_;
  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace knobtune
