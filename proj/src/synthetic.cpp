#include "knobtune/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "knobtune/rng.hpp"

namespace knobtune {

namespace {

Resource parse_resource(const std::string& s) {
  if (s == "ram") return Resource::Ram;
  if (s == "cpu") return Resource::Cpu;
  if (s == "disk") return Resource::Disk;
  throw ParseError("unknown resource '" + s + "'");
}

std::string resource_name(Resource r) {
  switch (r) {
    case Resource::Ram: return "ram";
    case Resource::Cpu: return "cpu";
    case Resource::Disk: return "disk";
  }
  return "?";
}

double resource_amount(const HardwareProfile& hw, Resource r) {
  switch (r) {
    case Resource::Ram: return static_cast<double>(hw.ram_bytes);
    case Resource::Cpu: return static_cast<double>(hw.cpu_cores);
    case Resource::Disk: return static_cast<double>(hw.disk_bytes);
  }
  return 0.0;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double quantized(const KnobCatalog& catalog, std::size_t i, double u) {
  const auto& k = catalog[i];
  return k.to_unit(k.from_unit(std::clamp(u, 0.0, 1.0)));
}

double score_with_optima(const SyntheticModelSpec& spec, std::span<const double> v, std::span<const double> optima,
                         std::vector<double>* bumps) {
  std::vector<double> local(spec.influential.size());
  auto& b = bumps ? *bumps : local;
  b.resize(spec.influential.size());
  double s = spec.baseline;
  for (std::size_t k = 0; k < spec.influential.size(); ++k) {
    const auto& inf = spec.influential[k];
    const double x = quantized(spec.catalog, inf.index, v[inf.index]) - optima[k];
    b[k] = std::exp(-inf.curvature * x * x);
    s += inf.weight * b[k];
  }
  for (const auto& p : spec.interactions) s += p.strength * b[p.first] * b[p.second];
  return s;
}

}  // namespace

// ---------------------------------------------------------------- spec

void SyntheticModelSpec::validate() const {
  const std::size_t d = catalog.dimension();
  std::set<std::size_t> seen;
  for (const auto& k : influential) {
    if (k.index >= d) throw ValidationError("synthetic model: influential index out of range");
    if (!seen.insert(k.index).second) throw ValidationError("synthetic model: duplicate influential knob");
    if (!(k.weight > 0.0)) throw ValidationError("synthetic model: weights must be > 0");
    if (!(k.curvature > 0.0)) throw ValidationError("synthetic model: curvature must be > 0");
    if (!(k.optimum >= 0.0 && k.optimum <= 1.0)) throw ValidationError("synthetic model: optimum outside [0,1]");
    if (!catalog[k.index].is_numeric()) {
      throw ValidationError("synthetic model: influential knob '" + catalog[k.index].name + "' must be numeric");
    }
  }
  for (const auto& p : interactions) {
    if (p.first >= influential.size() || p.second >= influential.size() || p.first == p.second) {
      throw ValidationError("synthetic model: interaction must reference two distinct influential knobs");
    }
  }
  for (const auto& c : couplings) {
    bool found = false;
    for (const auto& k : influential) found = found || k.index == c.index;
    if (!found) throw ValidationError("synthetic model: coupled knob must be influential");
    if (!(c.fraction > 0.0)) throw ValidationError("synthetic model: coupling fraction must be > 0");
  }
  if (!(noise_sd >= 0.0)) throw ValidationError("synthetic model: noise_sd must be >= 0");
  if (!(baseline > 0.0) || !(tps_scale > 0.0) || !(latency_scale_ms > 0.0)) {
    throw ValidationError("synthetic model: scales must be > 0");
  }
  hardware.validate();
}

std::vector<double> SyntheticModelSpec::effective_optima() const {
  std::vector<double> opt(influential.size());
  for (std::size_t k = 0; k < influential.size(); ++k) {
    opt[k] = influential[k].optimum;
    for (const auto& c : couplings) {
      if (c.index != influential[k].index) continue;
      const auto& knob = catalog[c.index];
      opt[k] = knob.to_unit(knob.clamp_numeric(c.fraction * resource_amount(hardware, c.resource)));
    }
  }
  return opt;
}

double SyntheticModelSpec::max_score() const {
  double s = baseline;
  for (const auto& k : influential) s += k.weight;
  for (const auto& p : interactions) s += std::max(0.0, p.strength);
  return s;
}

json SyntheticModelSpec::to_json() const {
  json j;
  j["influential"] = json::array();
  for (const auto& k : influential) {
    j["influential"].push_back(
        {{"knob", catalog[k.index].name}, {"weight", k.weight}, {"optimum", k.optimum}, {"curvature", k.curvature}});
  }
  j["interactions"] = json::array();
  for (const auto& p : interactions) {
    j["interactions"].push_back({{"a", catalog[influential[p.first].index].name},
                                 {"b", catalog[influential[p.second].index].name},
                                 {"strength", p.strength}});
  }
  j["couplings"] = json::array();
  for (const auto& c : couplings) {
    j["couplings"].push_back(
        {{"knob", catalog[c.index].name}, {"resource", resource_name(c.resource)}, {"fraction", c.fraction}});
  }
  j["noise_sd"] = noise_sd;
  j["hardware"] = hardware.to_json();
  j["baseline"] = baseline;
  j["tps_scale"] = tps_scale;
  j["latency_scale_ms"] = latency_scale_ms;
  j["queries_per_transaction"] = queries_per_transaction;
  return j;
}

SyntheticModelSpec SyntheticModelSpec::from_json(const json& j, KnobCatalog catalog, MetricSchema schema) {
  SyntheticModelSpec spec;
  spec.catalog = std::move(catalog);
  spec.schema = std::move(schema);
  auto knob_index = [&](const json& name) {
    const auto s = name.get<std::string>();
    auto idx = spec.catalog.index_of(s);
    if (!idx) throw ValidationError("synthetic model references unknown knob '" + s + "'");
    return *idx;
  };
  try {
    for (const auto& o : j.at("influential")) {
      InfluentialKnob k;
      k.index = knob_index(o.at("knob"));
      k.weight = o.at("weight").get<double>();
      k.optimum = o.value("optimum", 0.5);
      k.curvature = o.at("curvature").get<double>();
      spec.influential.push_back(k);
    }
    auto influential_pos = [&](const json& name) {
      const auto idx = knob_index(name);
      for (std::size_t k = 0; k < spec.influential.size(); ++k) {
        if (spec.influential[k].index == idx) return k;
      }
      throw ValidationError("interaction references non-influential knob '" + name.get<std::string>() + "'");
    };
    for (const auto& o : j.value("interactions", json::array())) {
      spec.interactions.push_back({influential_pos(o.at("a")), influential_pos(o.at("b")), o.at("strength").get<double>()});
    }
    for (const auto& o : j.value("couplings", json::array())) {
      spec.couplings.push_back(
          {knob_index(o.at("knob")), parse_resource(o.at("resource").get<std::string>()), o.at("fraction").get<double>()});
    }
    spec.noise_sd = j.value("noise_sd", 0.02);
    if (j.contains("hardware")) spec.hardware = HardwareProfile::from_json(j.at("hardware"));
    spec.baseline = j.value("baseline", 1.0);
    spec.tps_scale = j.value("tps_scale", 400.0);
    spec.latency_scale_ms = j.value("latency_scale_ms", 40.0);
    spec.queries_per_transaction = j.value("queries_per_transaction", 20.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic model spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticModelSpec load_synthetic_spec(const std::filesystem::path& path, KnobCatalog catalog, MetricSchema schema) {
  return SyntheticModelSpec::from_json(read_json_file(path), std::move(catalog), std::move(schema));
}

// ---------------------------------------------------------------- fitness

double workload_factor(const WorkloadSpec& w) {
  const double t = static_cast<double>(w.threads);
  return (0.6 + 0.4 * w.read_fraction) * (2.0 * t / (t + 32.0));
}

double congestion_factor(const WorkloadSpec& w) { return 1.0 + static_cast<double>(w.threads) / 256.0; }

double synthetic_score(const SyntheticModelSpec& spec, std::span<const double> v) {
  if (v.size() != spec.catalog.dimension()) throw DimensionError("synthetic_score: dimension mismatch");
  const auto optima = spec.effective_optima();
  return score_with_optima(spec, v, optima, nullptr);
}

double synthetic_true_fitness(const SyntheticModelSpec& spec, std::span<const double> v, const WorkloadSpec& workload) {
  const double s = synthetic_score(spec, v);
  const double tps = spec.tps_scale * workload_factor(workload) * s;
  const double p95 = spec.latency_scale_ms * congestion_factor(workload) / s;
  return tps / p95;
}

std::pair<std::vector<double>, double> synthetic_optimum(const SyntheticModelSpec& spec, const WorkloadSpec& workload) {
  std::vector<double> x(spec.catalog.dimension(), 0.5);
  auto f = [&](const std::vector<double>& v) { return synthetic_true_fitness(spec, v, workload); };
  double best = f(x);
  if (spec.influential.empty()) return {x, best};

  constexpr int kGrid = 400;
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool changed = false;
    for (const auto& inf : spec.influential) {
      const std::size_t i = inf.index;
      double keep = x[i];
      for (int g = 0; g <= kGrid; ++g) {
        x[i] = static_cast<double>(g) / kGrid;
        const double val = f(x);
        if (val > best) {
          best = val;
          keep = x[i];
          changed = true;
        }
      }
      x[i] = keep;
    }
    if (!changed) break;
  }

  // Golden-section refinement inside one grid cell around each coordinate.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int sweep = 0; sweep < 5; ++sweep) {
    bool changed = false;
    for (const auto& inf : spec.influential) {
      const std::size_t i = inf.index;
      const double centre = x[i];
      double lo = std::max(0.0, centre - 1.0 / kGrid);
      double hi = std::min(1.0, centre + 1.0 / kGrid);
      for (int it = 0; it < 60; ++it) {
        const double a = hi - phi * (hi - lo);
        const double b = lo + phi * (hi - lo);
        x[i] = a;
        const double fa = f(x);
        x[i] = b;
        const double fb = f(x);
        if (fa >= fb) hi = b;
        else lo = a;
      }
      x[i] = 0.5 * (lo + hi);
      const double val = f(x);
      if (val > best) {
        best = val;
        changed = true;
      } else {
        x[i] = centre;
      }
    }
    if (!changed) break;
  }
  return {x, best};
}

// ---------------------------------------------------------------- environment

SyntheticEnvironment::SyntheticEnvironment(SyntheticModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  optima_ = spec_.effective_optima();

  // The buffer-miss channels follow the first RAM-coupled knob.
  for (std::size_t k = spec_.influential.size(); k-- > 0;) {
    for (const auto& c : spec_.couplings) {
      if (c.resource == Resource::Ram && c.index == spec_.influential[k].index) miss_knob_ = k;
    }
  }

  channels_.resize(spec_.schema.size());
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    const auto& entry = spec_.schema[c];
    Channel& ch = channels_[c];
    Rng rng(name_hash(entry.name));
    ch.scale = std::pow(10.0, rng.uniform(1.0, 5.0));
    ch.offset = ch.scale * rng.uniform(1e3, 1e4);
    ch.perf_loading = rng.uniform(0.0, 1.0);
    ch.knob_loadings.resize(spec_.influential.size());
    for (auto& l : ch.knob_loadings) l = rng.uniform(-1.0, 1.0);

    if (entry.name == "innodb_page_size") {
      ch.role = Channel::Role::Constant;
      ch.scale = 16384.0;
    } else if (!spec_.influential.empty() &&
               (entry.name == "buffer_pool_reads" || entry.name == "buffer_data_reads" || entry.name == "os_data_reads")) {
      ch.role = Channel::Role::BufferMiss;
    } else if (entry.agg == Aggregation::Instant) {
      if (auto idx = spec_.catalog.index_of("innodb_" + entry.name); idx && spec_.catalog[*idx].is_numeric()) {
        ch.role = Channel::Role::KnobValue;
        ch.knob_index = *idx;
      }
    }
  }
}

std::pair<double, double> SyntheticEnvironment::instant_range(std::size_t channel) const {
  const Channel& ch = channels_.at(channel);
  switch (ch.role) {
    case Channel::Role::Constant: return {ch.scale, ch.scale};
    case Channel::Role::KnobValue: {
      const auto& k = spec_.catalog[ch.knob_index];
      return {k.min_value, k.max_value};
    }
    default: return {0.0, ch.scale * 1.02 * 1.05};
  }
}

EnvObservation SyntheticEnvironment::evaluate(const Configuration& config, const WorkloadSpec& workload,
                                              std::uint64_t seed, const std::string&) {
  workload.validate();
  if (config.normalized.size() != spec_.catalog.dimension()) {
    throw DimensionError("synthetic env: configuration dimension mismatch");
  }
  // The physical values are what a DBMS would see; derive coordinates from them.
  const std::vector<double> v = normalize(spec_.catalog, config.physical);

  std::vector<double> bumps;
  const double score = score_with_optima(spec_, v, optima_, &bumps);
  const double smax = spec_.max_score();

  Rng rng(seed);
  const double tps_noise = std::exp(spec_.noise_sd * rng.normal());
  const double lat_noise = std::exp(spec_.noise_sd * rng.normal());

  EnvObservation obs;
  obs.perf.tps = spec_.tps_scale * workload_factor(workload) * score * tps_noise;
  obs.perf.p95_latency_ms = spec_.latency_scale_ms * congestion_factor(workload) / score * lat_noise;
  obs.perf.qps = obs.perf.tps * spec_.queries_per_transaction;
  obs.wall_time_s = workload.duration_s;

  const std::size_t frames = workload.frame_count();
  const std::size_t m = channels_.size();
  obs.frames.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    obs.frames[t].timestamp = static_cast<double>(t + 1) * workload.frame_interval_s;
    obs.frames[t].values.resize(m);
  }

  const double scale_k = spec_.influential.empty() ? 0.0 : 0.5 / std::sqrt(static_cast<double>(spec_.influential.size()));
  for (std::size_t c = 0; c < m; ++c) {
    const Channel& ch = channels_[c];
    double level;
    switch (ch.role) {
      case Channel::Role::Constant:
        level = 1.0;
        break;
      case Channel::Role::KnobValue:
        level = spec_.catalog[ch.knob_index].numeric(config.physical.at(spec_.catalog[ch.knob_index].name)) / ch.scale;
        break;
      case Channel::Role::BufferMiss:
        level = (0.05 + (1.0 - bumps[miss_knob_])) / 1.05;
        break;
      case Channel::Role::Generic: {
        double z = 0.5 + ch.perf_loading * 0.3 * (score / smax - 0.5);
        for (std::size_t k = 0; k < bumps.size(); ++k) z += scale_k * ch.knob_loadings[k] * (bumps[k] - 0.5);
        level = std::clamp(z, 0.0, 1.0);
        break;
      }
    }

    // Noise draws happen for every channel in a fixed order regardless of the
    // configuration, so a fixed seed gives a fixed noise realisation.
    if (spec_.schema[c].agg == Aggregation::Counter) {
      double value = ch.offset;
      for (std::size_t t = 0; t < frames; ++t) {
        const double jitter = 1.0 + 0.02 * rng.uniform(-1.0, 1.0);
        value += ch.scale * level * workload.frame_interval_s * jitter;
        obs.frames[t].values[c] = value;
      }
    } else {
      for (std::size_t t = 0; t < frames; ++t) {
        const double jitter = 1.0 + 0.02 * rng.uniform(-1.0, 1.0);
        const bool exact = ch.role == Channel::Role::Constant || ch.role == Channel::Role::KnobValue;
        obs.frames[t].values[c] = ch.scale * level * (exact ? 1.0 : jitter);
      }
    }
  }
  return obs;
}

}  // namespace knobtune
