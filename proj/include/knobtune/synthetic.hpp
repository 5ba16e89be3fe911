#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "knobtune/environment.hpp"

namespace knobtune {

struct InfluentialKnob {
  std::size_t index = 0;
  double weight = 1.0;
  double optimum = 0.5;  ///< position in [0,1]; overridden by a hardware coupling
  double curvature = 8.0;
};

struct InteractionPair {
  std::size_t first = 0;
  std::size_t second = 0;
  double strength = 0.0;
};

enum class Resource { Ram, Cpu, Disk };

/// The knob's best physical value is `fraction` of the resource, saturating at
/// the knob's bounds.
struct HardwareCoupling {
  std::size_t index = 0;
  Resource resource = Resource::Ram;
  double fraction = 1.0;
};

/// Planted-optimum performance model. The latent score is
///   baseline + sum_k w_k b_k + sum_(i,j) s_ij b_i b_j,   b_k = exp(-c_k (v_k - opt_k)^2)
/// scaled by a workload factor; tps grows with the score and p95 shrinks with it.
struct SyntheticModelSpec {
  KnobCatalog catalog;
  MetricSchema schema;
  std::vector<InfluentialKnob> influential;
  std::vector<InteractionPair> interactions;
  double noise_sd = 0.02;
  HardwareProfile hardware;
  std::vector<HardwareCoupling> couplings;
  double baseline = 1.0;
  double tps_scale = 400.0;
  double latency_scale_ms = 40.0;
  double queries_per_transaction = 20.0;

  void validate() const;

  /// Optimum position of each influential knob after hardware couplings.
  std::vector<double> effective_optima() const;

  /// Upper bound on the latent score (all bumps at 1).
  double max_score() const;

  json to_json() const;
  /// Knobs are referenced by name; hardware may be overridden by the caller.
  static SyntheticModelSpec from_json(const json& j, KnobCatalog catalog, MetricSchema schema);
};

SyntheticModelSpec load_synthetic_spec(const std::filesystem::path& path, KnobCatalog catalog, MetricSchema schema);

double workload_factor(const WorkloadSpec& workload);
double congestion_factor(const WorkloadSpec& workload);

/// Noise-free latent score at v (influential coordinates are quantized onto
/// the catalog grid first, exactly as the environment sees them).
double synthetic_score(const SyntheticModelSpec& spec, std::span<const double> v);

/// Noise-free TPS / p95 at v.
double synthetic_true_fitness(const SyntheticModelSpec& spec, std::span<const double> v, const WorkloadSpec& workload);

/// Deterministic grid + coordinate-refine search over the influential
/// coordinates. Non-influential coordinates are left at 0.5.
std::pair<std::vector<double>, double> synthetic_optimum(const SyntheticModelSpec& spec, const WorkloadSpec& workload);

class SyntheticEnvironment final : public Environment {
 public:
  explicit SyntheticEnvironment(SyntheticModelSpec spec);

  const KnobCatalog& catalog() const override { return spec_.catalog; }
  const MetricSchema& schema() const override { return spec_.schema; }
  const SyntheticModelSpec& spec() const { return spec_; }

  using Environment::evaluate;
  EnvObservation evaluate(const Configuration& config, const WorkloadSpec& workload, std::uint64_t seed,
                          const std::string& trial_id) override;

  /// Declared [lo, hi] range of an instant channel.
  std::pair<double, double> instant_range(std::size_t channel) const;

 private:
  struct Channel {
    enum class Role { Generic, Constant, BufferMiss, KnobValue } role = Role::Generic;
    double scale = 1.0;
    double offset = 0.0;
    double perf_loading = 0.0;
    std::vector<double> knob_loadings;
    std::size_t knob_index = 0;
  };

  SyntheticModelSpec spec_;
  std::vector<double> optima_;
  std::vector<Channel> channels_;
  std::size_t miss_knob_ = 0;  ///< position in spec_.influential driving the buffer-miss channels
};

}  // namespace knobtune
