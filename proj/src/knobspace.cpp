#include "knobtune/knobspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace knobtune {

namespace {

[[noreturn]] void invalid(const std::string& knob, const std::string& what) {
  throw ValidationError("knob '" + knob + "': " + what);
}

KnobKind parse_kind(const std::string& s) {
  if (s == "integer") return KnobKind::Integer;
  if (s == "real") return KnobKind::Real;
  if (s == "enum") return KnobKind::Enum;
  if (s == "boolean") return KnobKind::Boolean;
  throw ParseError("unknown knob kind '" + s + "'");
}

KnobScale parse_scale(const std::string& s) {
  if (s == "linear") return KnobScale::Linear;
  if (s == "log") return KnobScale::Log;
  throw ParseError("unknown knob scale '" + s + "'");
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string to_string(KnobKind kind) {
  switch (kind) {
    case KnobKind::Integer: return "integer";
    case KnobKind::Real: return "real";
    case KnobKind::Enum: return "enum";
    case KnobKind::Boolean: return "boolean";
  }
  return "?";
}

std::string to_string(KnobScale scale) { return scale == KnobScale::Log ? "log" : "linear"; }

std::string to_string(const KnobValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else return v;
      },
      value);
}

json to_json(const KnobValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

// ---------------------------------------------------------------- KnobSpec

void KnobSpec::validate() const {
  if (name.empty()) throw ValidationError("knob with empty name");
  switch (kind) {
    case KnobKind::Integer:
    case KnobKind::Real: {
      if (!std::isfinite(min_value) || !std::isfinite(max_value)) invalid(name, "non-finite bounds");
      if (!(min_value < max_value)) invalid(name, "min_value must be < max_value");
      if (scale == KnobScale::Log && !(min_value > 0.0)) invalid(name, "log scale requires min_value > 0");
      double d;
      if (const auto* i = std::get_if<std::int64_t>(&default_value)) d = static_cast<double>(*i);
      else if (const auto* r = std::get_if<double>(&default_value)) d = *r;
      else invalid(name, "default_value must be numeric");
      if (kind == KnobKind::Integer && std::holds_alternative<double>(default_value)) {
        invalid(name, "integer knob default must be an integer");
      }
      if (d < min_value || d > max_value) invalid(name, "default_value outside [min_value, max_value]");
      if (kind == KnobKind::Integer && std::ceil(min_value) > std::floor(max_value)) {
        invalid(name, "integer range contains no integer");
      }
      break;
    }
    case KnobKind::Enum: {
      if (enum_values.empty()) invalid(name, "enum_values must be non-empty");
      std::set<std::string> seen(enum_values.begin(), enum_values.end());
      if (seen.size() != enum_values.size()) invalid(name, "duplicate enum literal");
      const auto* lit = std::get_if<std::string>(&default_value);
      if (!lit || !seen.contains(*lit)) invalid(name, "default_value not among enum_values");
      break;
    }
    case KnobKind::Boolean:
      if (!std::holds_alternative<bool>(default_value)) invalid(name, "boolean knob default must be a bool");
      break;
  }
}

KnobValue KnobSpec::from_unit(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) invalid(name, "normalized coordinate outside [0,1]: " + format_number(u));
  switch (kind) {
    case KnobKind::Integer:
    case KnobKind::Real: {
      double x;
      if (u == 0.0) {
        x = min_value;
      } else if (u == 1.0) {
        x = max_value;
      } else if (scale == KnobScale::Log) {
        const double lo = std::log(min_value);
        x = std::exp(lo + u * (std::log(max_value) - lo));
      } else {
        x = min_value + u * (max_value - min_value);
      }
      return clamp_numeric(x);
    }
    case KnobKind::Enum: {
      const std::size_t m = enum_values.size();
      auto idx = static_cast<std::size_t>(std::floor(u * static_cast<double>(m)));
      return enum_values[std::min(idx, m - 1)];
    }
    case KnobKind::Boolean:
      return u >= 0.5;
  }
  return 0.0;
}

double KnobSpec::to_unit(const KnobValue& value) const {
  switch (kind) {
    case KnobKind::Integer:
    case KnobKind::Real: {
      const double x = numeric(value);
      if (!(x >= min_value && x <= max_value)) {
        invalid(name, "value " + to_string(value) + " outside [" + format_number(min_value) + ", " +
                          format_number(max_value) + "]");
      }
      double u;
      if (scale == KnobScale::Log) {
        const double lo = std::log(min_value);
        u = (std::log(x) - lo) / (std::log(max_value) - lo);
      } else {
        u = (x - min_value) / (max_value - min_value);
      }
      return std::clamp(u, 0.0, 1.0);
    }
    case KnobKind::Enum: {
      const auto* lit = std::get_if<std::string>(&value);
      if (!lit) invalid(name, "enum knob expects a literal");
      auto it = std::find(enum_values.begin(), enum_values.end(), *lit);
      if (it == enum_values.end()) invalid(name, "unknown enum literal '" + *lit + "'");
      const auto idx = static_cast<double>(it - enum_values.begin());
      return (idx + 0.5) / static_cast<double>(enum_values.size());
    }
    case KnobKind::Boolean: {
      const auto* b = std::get_if<bool>(&value);
      if (!b) invalid(name, "boolean knob expects a bool");
      return *b ? 0.75 : 0.25;
    }
  }
  return 0.0;
}

KnobValue KnobSpec::clamp_numeric(double physical) const {
  if (!is_numeric()) invalid(name, "clamp_numeric on non-numeric knob");
  if (std::isnan(physical)) invalid(name, "NaN physical value");
  double x = std::clamp(physical, min_value, max_value);
  if (kind == KnobKind::Integer) {
    x = std::floor(x + 0.5);
    x = std::clamp(x, std::ceil(min_value), std::floor(max_value));
    return static_cast<std::int64_t>(x);
  }
  return x;
}

double KnobSpec::numeric(const KnobValue& value) const {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* r = std::get_if<double>(&value)) return *r;
  if (const auto* b = std::get_if<bool>(&value)) return *b ? 1.0 : 0.0;
  invalid(name, "expected a numeric value, got '" + std::get<std::string>(value) + "'");
}

// ---------------------------------------------------------------- Hardware

void HardwareProfile::validate() const {
  if (cpu_cores <= 0 || ram_bytes == 0 || disk_bytes == 0) {
    throw ValidationError("hardware profile fields must be strictly positive");
  }
}

json HardwareProfile::to_json() const {
  return json{{"cpu_cores", cpu_cores}, {"ram_bytes", ram_bytes}, {"disk_bytes", disk_bytes}};
}

HardwareProfile HardwareProfile::from_json(const json& j) {
  HardwareProfile hw;
  try {
    hw.cpu_cores = j.at("cpu_cores").get<std::int64_t>();
    hw.ram_bytes = j.at("ram_bytes").get<std::uint64_t>();
    hw.disk_bytes = j.at("disk_bytes").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("hardware profile: ") + e.what());
  }
  hw.validate();
  return hw;
}

HardwareProfile load_hardware(const std::filesystem::path& path) {
  return HardwareProfile::from_json(read_json_file(path));
}

// ---------------------------------------------------------------- Catalog

KnobCatalog::KnobCatalog(std::vector<KnobSpec> knobs) : knobs_(std::move(knobs)) {
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    knobs_[i].validate();
    if (!index_.emplace(knobs_[i].name, i).second) {
      throw ValidationError("duplicate knob name '" + knobs_[i].name + "'");
    }
  }
}

std::optional<std::size_t> KnobCatalog::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const KnobSpec& KnobCatalog::at(const std::string& name) const {
  auto idx = index_of(name);
  if (!idx) throw ValidationError("unknown knob '" + name + "'");
  return knobs_[*idx];
}

std::string KnobCatalog::fingerprint() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json KnobCatalog::to_json() const {
  json arr = json::array();
  for (const auto& k : knobs_) {
    json o;
    o["name"] = k.name;
    o["kind"] = to_string(k.kind);
    if (k.is_numeric()) {
      o["min"] = k.min_value;
      o["max"] = k.max_value;
    }
    o["default"] = knobtune::to_json(k.default_value);
    if (k.kind == KnobKind::Enum) o["enum_values"] = k.enum_values;
    o["scale"] = to_string(k.scale);
    o["unit"] = k.unit;
    o["restart_required"] = k.restart_required;
    arr.push_back(std::move(o));
  }
  return arr;
}

KnobCatalog KnobCatalog::from_json(const json& j) {
  if (!j.is_array()) throw ParseError("catalog must be a JSON array");
  std::vector<KnobSpec> knobs;
  knobs.reserve(j.size());
  for (const auto& o : j) {
    KnobSpec k;
    try {
      k.name = o.at("name").get<std::string>();
      k.kind = parse_kind(o.at("kind").get<std::string>());
      k.scale = parse_scale(o.value("scale", std::string("linear")));
      k.unit = o.value("unit", std::string());
      k.restart_required = o.value("restart_required", false);
      const json& def = o.at("default");
      switch (k.kind) {
        case KnobKind::Integer:
        case KnobKind::Real:
          k.min_value = o.at("min").get<double>();
          k.max_value = o.at("max").get<double>();
          if (k.kind == KnobKind::Integer && def.is_number_integer()) {
            k.default_value = def.get<std::int64_t>();
          } else if (k.kind == KnobKind::Integer && def.is_number()) {
            const double d = def.get<double>();
            if (d != std::floor(d)) invalid(k.name, "integer knob default must be an integer");
            k.default_value = static_cast<std::int64_t>(d);
          } else {
            k.default_value = def.get<double>();
          }
          break;
        case KnobKind::Enum:
          k.enum_values = o.at("enum_values").get<std::vector<std::string>>();
          k.default_value = def.get<std::string>();
          break;
        case KnobKind::Boolean:
          k.default_value = def.get<bool>();
          break;
      }
    } catch (const json::exception& e) {
      const std::string who = o.is_object() && o.contains("name") && o["name"].is_string()
                                  ? " (knob '" + o["name"].get<std::string>() + "')"
                                  : "";
      throw ParseError("catalog entry" + who + ": " + e.what());
    }
    knobs.push_back(std::move(k));
  }
  return KnobCatalog(std::move(knobs));
}

KnobCatalog load_catalog(const std::filesystem::path& path) {
  return KnobCatalog::from_json(read_json_file(path));
}

// ---------------------------------------------------------------- Mappings

json to_json(const PhysicalConfig& physical) {
  json o = json::object();
  for (const auto& [name, value] : physical) o[name] = to_json(value);
  return o;
}

Configuration denormalize(const KnobCatalog& catalog, std::span<const double> v) {
  if (v.size() != catalog.dimension()) {
    throw DimensionError("denormalize: vector length " + std::to_string(v.size()) + " != catalog dimension " +
                         std::to_string(catalog.dimension()));
  }
  Configuration c;
  c.normalized.assign(v.begin(), v.end());
  for (std::size_t i = 0; i < v.size(); ++i) c.physical.emplace(catalog[i].name, catalog[i].from_unit(v[i]));
  return c;
}

std::vector<double> normalize(const KnobCatalog& catalog, const PhysicalConfig& physical) {
  std::vector<double> v(catalog.dimension());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& knob = catalog[i];
    auto it = physical.find(knob.name);
    if (it == physical.end()) throw ValidationError("missing knob '" + knob.name + "'");
    v[i] = knob.to_unit(it->second);
  }
  return v;
}

Configuration from_physical(const KnobCatalog& catalog, const PhysicalConfig& physical) {
  Configuration c;
  c.normalized = normalize(catalog, physical);
  for (std::size_t i = 0; i < catalog.dimension(); ++i) c.physical[catalog[i].name] = physical.at(catalog[i].name);
  return c;
}

std::vector<double> quantize(const KnobCatalog& catalog, std::span<const double> v) {
  return normalize(catalog, denormalize(catalog, v).physical);
}

Configuration default_configuration(const KnobCatalog& catalog) {
  PhysicalConfig p;
  for (const auto& k : catalog.knobs()) p[k.name] = k.default_value;
  return from_physical(catalog, p);
}

std::vector<double> clip_to_trust_region(const TrustRegion& region, std::span<const double> v) {
  if (v.size() != region.center.size()) throw DimensionError("clip_to_trust_region: dimension mismatch");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double lo = std::max(0.0, region.center[i] - region.ratio);
    const double hi = std::min(1.0, region.center[i] + region.ratio);
    out[i] = std::clamp(v[i], lo, hi);
  }
  return out;
}

}  // namespace knobtune
