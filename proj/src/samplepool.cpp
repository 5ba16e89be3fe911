#include "knobtune/samplepool.hpp"

#include <algorithm>
#include <cmath>

namespace knobtune {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Lhs: return "lhs";
    case Stage::Hint: return "hint";
    case Stage::Coarse: return "coarse";
    case Stage::Td3: return "td3";
  }
  return "?";
}

Stage parse_stage(const std::string& s) {
  if (s == "lhs") return Stage::Lhs;
  if (s == "hint") return Stage::Hint;
  if (s == "coarse") return Stage::Coarse;
  if (s == "td3") return Stage::Td3;
  throw ParseError("unknown stage '" + s + "'");
}

Sample Sample::make(StateVector state, std::vector<double> action, PerfResult perf, Stage stage,
                    std::uint64_t trial_index, SeedInfo seed_info) {
  Sample s;
  s.state = std::move(state);
  s.action = std::move(action);
  s.perf = perf;
  s.fitness = knobtune::fitness(perf);
  s.stage = stage;
  s.trial_index = trial_index;
  s.seed_info = seed_info;
  return s;
}

json Sample::to_json() const {
  return json{{"state", state},
              {"action", action},
              {"perf", {{"tps", perf.tps}, {"p95_ms", perf.p95_latency_ms}, {"qps", perf.qps}}},
              {"fitness", fitness},
              {"stage", to_string(stage)},
              {"trial", trial_index},
              {"seed", seed_info.seed},
              {"stale", seed_info.stale},
              {"wall_s", wall_time_s}};
}

Sample Sample::from_json(const json& j) {
  Sample s;
  try {
    s.state = j.at("state").get<std::vector<double>>();
    s.action = j.at("action").get<std::vector<double>>();
    const auto& p = j.at("perf");
    s.perf.tps = p.at("tps").get<double>();
    s.perf.p95_latency_ms = p.at("p95_ms").get<double>();
    s.perf.qps = p.at("qps").get<double>();
    s.fitness = j.at("fitness").get<double>();
    s.stage = parse_stage(j.at("stage").get<std::string>());
    s.trial_index = j.at("trial").get<std::uint64_t>();
    s.seed_info.seed = j.value("seed", std::uint64_t{0});
    s.seed_info.stale = j.value("stale", false);
    s.wall_time_s = j.value("wall_s", 0.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("sample: ") + e.what());
  }
  return s;
}

SamplePool::SamplePool(std::string catalog_fingerprint, std::size_t dimension, HardwareProfile hardware)
    : catalog_fp_(std::move(catalog_fingerprint)), dimension_(dimension), hardware_(hardware) {
  hardware_.validate();
}

void SamplePool::skip_trial_index(std::uint64_t index) {
  if (index < next_trial_) throw ValidationError("skip_trial_index: index already used");
  next_trial_ = index + 1;
  if (sink_) {
    *sink_ << json{{"failed_trial", index}}.dump() << '\n';
    sink_->flush();
  }
}

void SamplePool::append(Sample sample) {
  if (sample.action.size() != dimension_) {
    throw DimensionError("pool append: action length " + std::to_string(sample.action.size()) + " != " +
                         std::to_string(dimension_));
  }
  for (double a : sample.action) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("pool append: action component outside [0,1]");
  }
  sample.perf.validate();
  if (std::abs(sample.fitness - fitness(sample.perf)) > 1e-12 * std::max(1.0, std::abs(sample.fitness))) {
    throw ValidationError("pool append: cached fitness disagrees with perf");
  }
  if (!samples_.empty() && !samples_.front().state.empty() && sample.state.size() != samples_.front().state.size()) {
    throw DimensionError("pool append: state length differs from earlier samples");
  }
  if (sample.trial_index < next_trial_) {
    throw ValidationError("pool append: trial index " + std::to_string(sample.trial_index) + " not increasing");
  }
  if (sink_) {
    *sink_ << sample.to_json().dump() << '\n';
    sink_->flush();
    if (!*sink_) throw Error("pool append: write failed");
  }
  next_trial_ = sample.trial_index + 1;
  samples_.push_back(std::move(sample));
}

std::optional<std::size_t> SamplePool::best_index(const SampleFilter& filter) const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (!filter.matches(s)) continue;
    if (!best || s.fitness > samples_[*best].fitness ||
        (s.fitness == samples_[*best].fitness && s.trial_index < samples_[*best].trial_index)) {
      best = i;
    }
  }
  return best;
}

const Sample& SamplePool::best_by_fitness(const SampleFilter& filter) const {
  auto idx = best_index(filter);
  if (!idx) throw InsufficientDataError("best_by_fitness: no sample matches the filter");
  return samples_[*idx];
}

std::vector<const Sample*> SamplePool::select(const SampleFilter& filter) const {
  std::vector<const Sample*> out;
  for (const auto& s : samples_) {
    if (filter.matches(s)) out.push_back(&s);
  }
  return out;
}

json SamplePool::header_json() const {
  return json{{"catalog_fp", catalog_fp_}, {"dimension", dimension_}, {"hardware", hardware_.to_json()}};
}

void SamplePool::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << header_json().dump() << '\n';
  std::uint64_t expected = 0;
  for (const auto& s : samples_) {
    // Reconstruct failure markers from gaps so a reload sees the same indices.
    for (; expected < s.trial_index; ++expected) out << json{{"failed_trial", expected}}.dump() << '\n';
    out << s.to_json().dump() << '\n';
    expected = s.trial_index + 1;
  }
  for (; expected < next_trial_; ++expected) out << json{{"failed_trial", expected}}.dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

void SamplePool::attach(const std::filesystem::path& path) {
  save(path);
  sink_ = std::make_shared<std::ofstream>(path, std::ios::app);
  if (!*sink_) throw Error("cannot append to " + path.string());
}

SamplePool SamplePool::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty pool file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad header: " + e.what());
  }
  SamplePool pool(header.at("catalog_fp").get<std::string>(), header.at("dimension").get<std::size_t>(),
                  HardwareProfile::from_json(header.at("hardware")));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("failed_trial")) {
      pool.skip_trial_index(j["failed_trial"].get<std::uint64_t>());
    } else {
      pool.append(Sample::from_json(j));
    }
  }
  return pool;
}

SamplePool migrate_pool(const SamplePool& pool, const KnobCatalog& old_catalog, const KnobCatalog& new_catalog,
                        const HardwareProfile& new_hardware) {
  if (old_catalog.fingerprint() != pool.catalog_fingerprint()) {
    throw ValidationError("migrate_pool: old catalog does not match the pool's fingerprint");
  }
  for (const auto& knob : old_catalog.knobs()) {
    auto idx = new_catalog.index_of(knob.name);
    if (!idx) throw ValidationError("migrate_pool: knob '" + knob.name + "' is missing from the new catalog");
    if (new_catalog[*idx].kind != knob.kind) {
      throw ValidationError("migrate_pool: knob '" + knob.name + "' changed kind");
    }
  }
  if (old_catalog.dimension() != new_catalog.dimension()) {
    throw ValidationError("migrate_pool: new catalog adds knobs absent from the old one");
  }

  SamplePool out(new_catalog.fingerprint(), new_catalog.dimension(), new_hardware);
  for (const auto& s : pool.samples()) {
    const Configuration old_config = denormalize(old_catalog, s.action);
    PhysicalConfig moved;
    for (const auto& knob : new_catalog.knobs()) {
      const KnobValue& value = old_config.physical.at(knob.name);
      if (knob.is_numeric()) {
        moved[knob.name] = knob.clamp_numeric(knob.numeric(value));
      } else if (knob.kind == KnobKind::Enum &&
                 std::find(knob.enum_values.begin(), knob.enum_values.end(), std::get<std::string>(value)) ==
                     knob.enum_values.end()) {
        moved[knob.name] = knob.default_value;
      } else {
        moved[knob.name] = value;
      }
    }
    Sample m = s;
    m.action = normalize(new_catalog, moved);
    m.seed_info.stale = true;
    out.append(std::move(m));
  }
  return out;
}

}  // namespace knobtune
