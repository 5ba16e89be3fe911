#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "knobtune/knobspace.hpp"
#include "knobtune/metrics.hpp"

namespace knobtune {

enum class Stage { Lhs, Hint, Coarse, Td3 };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& s);

struct SeedInfo {
  std::uint64_t seed = 0;
  bool stale = false;  ///< measured on other hardware; geometry only
};

/// One tuning trial: (state, action, performance).
struct Sample {
  StateVector state;
  std::vector<double> action;
  PerfResult perf;
  double fitness = 0.0;
  Stage stage = Stage::Lhs;
  std::uint64_t trial_index = 0;
  SeedInfo seed_info;
  double wall_time_s = 0.0;

  static Sample make(StateVector state, std::vector<double> action, PerfResult perf, Stage stage,
                     std::uint64_t trial_index, SeedInfo seed_info = {});
  json to_json() const;
  static Sample from_json(const json& j);
};

struct SampleFilter {
  std::optional<Stage> stage;
  bool include_stale = true;

  bool matches(const Sample& s) const {
    return (!stage || s.stage == *stage) && (include_stale || !s.seed_info.stale);
  }
};

/// Append-only store of samples shared by all stages. When attached to a
/// file, every append is written and flushed before returning.
class SamplePool {
 public:
  SamplePool(std::string catalog_fingerprint, std::size_t dimension, HardwareProfile hardware);

  const std::string& catalog_fingerprint() const { return catalog_fp_; }
  std::size_t dimension() const { return dimension_; }
  const HardwareProfile& hardware() const { return hardware_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// Trial index to use for the next new trial.
  std::uint64_t next_trial_index() const { return next_trial_; }
  /// Records that a trial index was consumed without producing a sample.
  void skip_trial_index(std::uint64_t index);

  /// Throws DimensionError / ValidationError and leaves the pool unchanged on
  /// a bad sample.
  void append(Sample sample);

  /// Highest fitness among matching samples; ties go to the lowest trial index.
  const Sample& best_by_fitness(const SampleFilter& filter = {}) const;
  std::optional<std::size_t> best_index(const SampleFilter& filter = {}) const;

  std::vector<const Sample*> select(const SampleFilter& filter) const;

  /// Writes the whole pool to `path` and keeps appending there.
  void attach(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  static SamplePool load(const std::filesystem::path& path);

  json header_json() const;

 private:
  std::string catalog_fp_;
  std::size_t dimension_;
  HardwareProfile hardware_;
  std::vector<Sample> samples_;
  std::uint64_t next_trial_ = 0;
  std::shared_ptr<std::ofstream> sink_;
};

/// Re-expresses a pool under a new catalog and hardware profile. Physical
/// values are kept where still in range and clamped otherwise; every sample
/// is marked stale.
SamplePool migrate_pool(const SamplePool& pool, const KnobCatalog& old_catalog, const KnobCatalog& new_catalog,
                        const HardwareProfile& new_hardware);

}  // namespace knobtune
