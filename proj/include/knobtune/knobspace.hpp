#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "knobtune/json_io.hpp"

namespace knobtune {

enum class KnobKind { Integer, Real, Enum, Boolean };
enum class KnobScale { Linear, Log };

/// Physical knob value. Integer knobs hold int64, real knobs double,
/// boolean knobs bool, enum knobs the literal.
using KnobValue = std::variant<std::int64_t, double, bool, std::string>;

std::string to_string(KnobKind kind);
std::string to_string(KnobScale scale);
std::string to_string(const KnobValue& value);
json to_json(const KnobValue& value);

struct KnobSpec {
  std::string name;
  KnobKind kind = KnobKind::Real;
  double min_value = 0.0;
  double max_value = 0.0;
  KnobValue default_value = 0.0;
  std::vector<std::string> enum_values;
  KnobScale scale = KnobScale::Linear;
  std::string unit;
  bool restart_required = false;

  bool is_numeric() const { return kind == KnobKind::Integer || kind == KnobKind::Real; }

  /// Throws ValidationError naming this knob and the broken invariant.
  void validate() const;

  /// Maps a unit coordinate to the physical value (floor buckets for enums,
  /// round-half-up for integers).
  KnobValue from_unit(double u) const;

  /// Inverse of from_unit. Throws ValidationError on out-of-range values.
  double to_unit(const KnobValue& value) const;

  /// Clamps a numeric physical value to [min, max] and quantizes per kind.
  KnobValue clamp_numeric(double physical) const;

  /// Numeric view of a value of a numeric knob.
  double numeric(const KnobValue& value) const;
};

struct HardwareProfile {
  std::int64_t cpu_cores = 1;
  std::uint64_t ram_bytes = 1;
  std::uint64_t disk_bytes = 1;

  void validate() const;
  json to_json() const;
  static HardwareProfile from_json(const json& j);
  bool operator==(const HardwareProfile&) const = default;
};

HardwareProfile load_hardware(const std::filesystem::path& path);

class KnobCatalog {
 public:
  KnobCatalog() = default;
  /// Validates every knob and name uniqueness.
  explicit KnobCatalog(std::vector<KnobSpec> knobs);

  std::size_t dimension() const { return knobs_.size(); }
  const KnobSpec& operator[](std::size_t i) const { return knobs_[i]; }
  std::span<const KnobSpec> knobs() const { return knobs_; }
  std::optional<std::size_t> index_of(const std::string& name) const;
  const KnobSpec& at(const std::string& name) const;

  /// FNV-1a 64 over the canonical JSON form, as 16 hex digits.
  std::string fingerprint() const;

  json to_json() const;
  static KnobCatalog from_json(const json& j);

 private:
  std::vector<KnobSpec> knobs_;
  std::unordered_map<std::string, std::size_t> index_;
};

KnobCatalog load_catalog(const std::filesystem::path& path);

using PhysicalConfig = std::map<std::string, KnobValue>;

struct Configuration {
  std::vector<double> normalized;
  PhysicalConfig physical;
};

json to_json(const PhysicalConfig& physical);

/// Maps v in [0,1]^d to physical knob values.
Configuration denormalize(const KnobCatalog& catalog, std::span<const double> v);

/// Inverse of denormalize; every knob must be present and in range.
std::vector<double> normalize(const KnobCatalog& catalog, const PhysicalConfig& physical);

/// Builds a Configuration from physical values (normalized via normalize()).
Configuration from_physical(const KnobCatalog& catalog, const PhysicalConfig& physical);

/// Snaps v onto the representable grid: normalize(denormalize(v)).
std::vector<double> quantize(const KnobCatalog& catalog, std::span<const double> v);

Configuration default_configuration(const KnobCatalog& catalog);

struct TrustRegion {
  std::vector<double> center;
  double ratio = 1.0;
};

/// Clamps each component to [center - ratio, center + ratio] intersected with [0, 1].
std::vector<double> clip_to_trust_region(const TrustRegion& region, std::span<const double> v);

}  // namespace knobtune
