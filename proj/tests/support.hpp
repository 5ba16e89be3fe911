#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "knobtune/knobspace.hpp"
#include "knobtune/metrics.hpp"
#include "knobtune/pipeline.hpp"
#include "knobtune/synthetic.hpp"

namespace testing {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(KNOBTUNE_SOURCE_DIR) / rel;
}

/// Fresh, empty scratch directory unique to this process.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("knobtune_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline knobtune::KnobSpec int_knob(std::string name, double lo, double hi, std::int64_t def,
                                   knobtune::KnobScale scale = knobtune::KnobScale::Linear) {
  knobtune::KnobSpec k;
  k.name = std::move(name);
  k.kind = knobtune::KnobKind::Integer;
  k.min_value = lo;
  k.max_value = hi;
  k.default_value = def;
  k.scale = scale;
  return k;
}

inline knobtune::KnobSpec real_knob(std::string name, double lo, double hi, double def,
                                    knobtune::KnobScale scale = knobtune::KnobScale::Linear) {
  knobtune::KnobSpec k;
  k.name = std::move(name);
  k.kind = knobtune::KnobKind::Real;
  k.min_value = lo;
  k.max_value = hi;
  k.default_value = def;
  k.scale = scale;
  return k;
}

inline knobtune::KnobSpec enum_knob(std::string name, std::vector<std::string> values, std::string def) {
  knobtune::KnobSpec k;
  k.name = std::move(name);
  k.kind = knobtune::KnobKind::Enum;
  k.enum_values = std::move(values);
  k.default_value = std::move(def);
  return k;
}

inline knobtune::KnobSpec bool_knob(std::string name, bool def) {
  knobtune::KnobSpec k;
  k.name = std::move(name);
  k.kind = knobtune::KnobKind::Boolean;
  k.default_value = def;
  return k;
}

/// Four knobs, one of each kind.
inline knobtune::KnobCatalog mixed_catalog() {
  return knobtune::KnobCatalog({int_knob("pool_bytes", 1024, 1 << 30, 1 << 20, knobtune::KnobScale::Log),
                                real_knob("ratio", 0.0, 10.0, 2.5),
                                enum_knob("mode", {"a", "b", "c", "d", "e"}, "c"),
                                bool_knob("flag", true)});
}

inline knobtune::KnobCatalog synthetic_catalog() { return knobtune::load_catalog(source_path("catalogs/synthetic50.json")); }
inline knobtune::MetricSchema innodb_schema() { return knobtune::load_schema(source_path("schemas/innodb63.json")); }

inline knobtune::SyntheticModelSpec synthetic_model() {
  return knobtune::load_synthetic_spec(source_path("configs/synthetic50_model.json"), synthetic_catalog(),
                                       innodb_schema());
}

inline knobtune::WorkloadSpec workload(const std::string& kind = "readwrite") {
  return knobtune::load_workload(source_path("configs/workload_" + kind + ".json"));
}

/// Synthetic plan with the default budgets: 120 + 5 + 30 trials, db backend.
inline knobtune::RunPlan synthetic_plan(const std::filesystem::path& out, std::uint64_t seed) {
  knobtune::RunPlan p;
  p.catalog = source_path("catalogs/synthetic50.json").string();
  p.schema = source_path("schemas/innodb63.json").string();
  p.env = "synthetic:" + source_path("configs/synthetic50_model.json").string();
  p.workload = source_path("configs/workload_readwrite.json").string();
  p.hardware = source_path("configs/hardware_12c64g.json").string();
  p.hints = source_path("hints/synthetic_demo.json").string();
  p.seed = seed;
  p.out = out.string();
  return p;
}

}  // namespace testing
