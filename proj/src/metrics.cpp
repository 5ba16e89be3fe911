#include "knobtune/metrics.hpp"

#include <cmath>
#include <set>

namespace knobtune {

MetricSchema::MetricSchema(std::vector<MetricEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.name.empty()) throw ValidationError("metric with empty name");
    if (!seen.insert(e.name).second) throw ValidationError("duplicate metric '" + e.name + "'");
  }
}

std::optional<std::size_t> MetricSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

json MetricSchema::to_json() const {
  json arr = json::array();
  for (const auto& e : entries_) {
    arr.push_back({{"name", e.name}, {"agg", e.agg == Aggregation::Counter ? "counter" : "instant"}});
  }
  return arr;
}

MetricSchema MetricSchema::from_json(const json& j) {
  if (!j.is_array()) throw ParseError("metric schema must be a JSON array");
  std::vector<MetricEntry> entries;
  for (const auto& o : j) {
    MetricEntry e;
    try {
      e.name = o.at("name").get<std::string>();
      const auto agg = o.at("agg").get<std::string>();
      if (agg == "counter") e.agg = Aggregation::Counter;
      else if (agg == "instant") e.agg = Aggregation::Instant;
      else throw ParseError("metric '" + e.name + "': unknown agg '" + agg + "'");
    } catch (const json::exception& ex) {
      throw ParseError(std::string("metric schema entry: ") + ex.what());
    }
    entries.push_back(std::move(e));
  }
  return MetricSchema(std::move(entries));
}

MetricSchema load_schema(const std::filesystem::path& path) { return MetricSchema::from_json(read_json_file(path)); }

void PerfResult::validate() const {
  if (!(tps >= 0.0) || !(qps >= 0.0) || !std::isfinite(tps) || !std::isfinite(qps)) {
    throw ValidationError("perf: tps and qps must be finite and >= 0");
  }
  if (!(p95_latency_ms > 0.0) || !std::isfinite(p95_latency_ms)) {
    throw ValidationError("perf: p95 latency must be finite and > 0");
  }
}

StateVector aggregate_frames(const MetricSchema& schema, std::span<const MetricFrame> frames) {
  if (frames.size() < 2) throw ValidationError("aggregate_frames: need at least 2 frames");
  const std::size_t m = schema.size();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].values.size() != m) {
      throw DimensionError("aggregate_frames: frame " + std::to_string(t) + " has " +
                           std::to_string(frames[t].values.size()) + " values, schema has " + std::to_string(m));
    }
    if (t > 0 && frames[t].timestamp < frames[t - 1].timestamp) {
      throw ValidationError("aggregate_frames: frames not time-ordered");
    }
  }

  StateVector s(m, 0.0);
  const double count = static_cast<double>(frames.size());
  for (std::size_t i = 0; i < m; ++i) {
    if (schema[i].agg == Aggregation::Counter) {
      for (std::size_t t = 1; t < frames.size(); ++t) {
        if (frames[t].values[i] < frames[t - 1].values[i]) {
          throw ValidationError("aggregate_frames: counter '" + schema[i].name + "' decreased at frame " +
                                std::to_string(t) + " (metric reset?)");
        }
      }
      s[i] = frames.back().values[i] - frames.front().values[i];
    } else {
      double sum = 0.0;
      for (const auto& f : frames) sum += f.values[i];
      s[i] = sum / count;
    }
    if (!std::isfinite(s[i])) throw ValidationError("aggregate_frames: non-finite value for '" + schema[i].name + "'");
  }
  return s;
}

double fitness(const PerfResult& p) {
  if (!(p.p95_latency_ms > 0.0)) throw ValidationError("fitness: p95 latency must be > 0");
  return p.tps / p.p95_latency_ms;
}

}  // namespace knobtune
