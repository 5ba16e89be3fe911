#include "knobtune/environment.hpp"

#include <cmath>

namespace knobtune {

void WorkloadSpec::validate() const {
  if (!(read_fraction >= 0.0 && read_fraction <= 1.0)) throw ValidationError("workload: read_fraction outside [0,1]");
  if (threads < 1) throw ValidationError("workload: threads must be >= 1");
  if (!(frame_interval_s > 0.0)) throw ValidationError("workload: frame_interval_s must be > 0");
  if (!(duration_s >= 2.0 * frame_interval_s)) throw ValidationError("workload: duration_s must be >= 2 frame intervals");
}

std::size_t WorkloadSpec::frame_count() const {
  return static_cast<std::size_t>(std::floor(duration_s / frame_interval_s + 1e-9));
}

json WorkloadSpec::to_json() const {
  return json{{"name", name},
              {"read_fraction", read_fraction},
              {"threads", threads},
              {"duration_s", duration_s},
              {"frame_interval_s", frame_interval_s}};
}

WorkloadSpec WorkloadSpec::from_json(const json& j) {
  WorkloadSpec w;
  try {
    w.name = j.value("name", std::string("default"));
    w.read_fraction = j.at("read_fraction").get<double>();
    w.threads = j.at("threads").get<std::int64_t>();
    w.duration_s = j.value("duration_s", 60.0);
    w.frame_interval_s = j.value("frame_interval_s", 5.0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("workload: ") + e.what());
  }
  w.validate();
  return w;
}

WorkloadSpec load_workload(const std::filesystem::path& path) { return WorkloadSpec::from_json(read_json_file(path)); }

}  // namespace knobtune
