#include "knobtune/driver.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace knobtune {

json make_evaluate_request(const Configuration& config, const WorkloadSpec& workload, const std::string& trial_id) {
  return json{{"op", "evaluate"}, {"config", to_json(config.physical)}, {"workload", workload.to_json()},
              {"trial_id", trial_id}};
}

EnvObservation parse_evaluate_response(const json& response, const MetricSchema& schema) {
  if (!response.is_object()) throw EnvironmentError("driver: response is not a JSON object");
  if (response.contains("error")) {
    const auto& e = response["error"];
    throw EnvironmentError("driver reported error: " + (e.is_string() ? e.get<std::string>() : e.dump()));
  }
  EnvObservation obs;
  try {
    for (const auto& f : response.at("frames")) {
      MetricFrame frame;
      frame.timestamp = f.at("t").get<double>();
      frame.values = f.at("values").get<std::vector<double>>();
      if (frame.values.size() != schema.size()) {
        throw EnvironmentError("driver: frame has " + std::to_string(frame.values.size()) + " values, expected " +
                               std::to_string(schema.size()));
      }
      obs.frames.push_back(std::move(frame));
    }
    const auto& perf = response.at("perf");
    obs.perf.tps = perf.at("tps").get<double>();
    obs.perf.p95_latency_ms = perf.at("p95_ms").get<double>();
    obs.perf.qps = perf.at("qps").get<double>();
    obs.wall_time_s = response.value("wall_s", 0.0);
  } catch (const json::exception& e) {
    throw EnvironmentError(std::string("driver: malformed response: ") + e.what());
  }
  try {
    obs.perf.validate();
  } catch (const ValidationError& e) {
    throw EnvironmentError(std::string("driver: ") + e.what());
  }
  return obs;
}

DriverEnvironment::DriverEnvironment(KnobCatalog catalog, MetricSchema schema, std::string command,
                                     std::chrono::milliseconds timeout)
    : catalog_(std::move(catalog)), schema_(std::move(schema)), command_(std::move(command)), timeout_(timeout) {
  // A dead driver must surface as a write error, not kill the tuner.
  std::signal(SIGPIPE, SIG_IGN);
}

DriverEnvironment::~DriverEnvironment() { stop(); }

void DriverEnvironment::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw EnvironmentError(std::string("driver: pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw EnvironmentError(std::string("driver: pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw EnvironmentError(std::string("driver: fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void DriverEnvironment::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::string DriverEnvironment::read_line(std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (remaining <= 0) throw EnvironmentError("driver: timed out waiting for response");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw EnvironmentError(std::string("driver: poll: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EnvironmentError(std::string("driver: read: ") + std::strerror(errno));
    }
    if (n == 0) throw EnvironmentError("driver: process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

EnvObservation DriverEnvironment::evaluate(const Configuration& config, const WorkloadSpec& workload,
                                           std::uint64_t, const std::string& trial_id) {
  if (config.normalized.size() != catalog_.dimension()) throw DimensionError("driver env: configuration dimension mismatch");
  if (pid_ <= 0) start();

  const auto started = std::chrono::steady_clock::now();
  const std::string line = make_evaluate_request(config, workload, trial_id).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      throw EnvironmentError(std::string("driver: write: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }

  std::string reply;
  try {
    reply = read_line(started + timeout_);
  } catch (const EnvironmentError&) {
    stop();
    throw;
  }

  json response;
  try {
    response = json::parse(reply);
  } catch (const json::exception& e) {
    stop();
    throw EnvironmentError(std::string("driver: response is not JSON: ") + e.what());
  }
  EnvObservation obs = parse_evaluate_response(response, schema_);
  if (obs.wall_time_s <= 0.0) {
    obs.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return obs;
}

}  // namespace knobtune
