#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knobtune/json_io.hpp"

namespace knobtune {

enum class Aggregation { Counter, Instant };

struct MetricEntry {
  std::string name;
  Aggregation agg = Aggregation::Instant;
};

class MetricSchema {
 public:
  MetricSchema() = default;
  explicit MetricSchema(std::vector<MetricEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const MetricEntry& operator[](std::size_t i) const { return entries_[i]; }
  std::span<const MetricEntry> entries() const { return entries_; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  json to_json() const;
  static MetricSchema from_json(const json& j);

 private:
  std::vector<MetricEntry> entries_;
};

MetricSchema load_schema(const std::filesystem::path& path);

struct MetricFrame {
  double timestamp = 0.0;
  std::vector<double> values;
};

using StateVector = std::vector<double>;

struct PerfResult {
  double tps = 0.0;
  double p95_latency_ms = 1.0;
  double qps = 0.0;

  void validate() const;
};

/// Collapses a trial's frames into one value per metric: last-minus-first for
/// counters, temporal mean for instants. Throws on < 2 frames, misaligned
/// frames, out-of-order timestamps, or a decreasing counter.
StateVector aggregate_frames(const MetricSchema& schema, std::span<const MetricFrame> frames);

/// TPS divided by p95 latency (ms). Throws ValidationError on latency <= 0.
double fitness(const PerfResult& p);

}  // namespace knobtune
