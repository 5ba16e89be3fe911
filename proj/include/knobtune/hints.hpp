#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "knobtune/knobspace.hpp"
#include "knobtune/rng.hpp"
#include "knobtune/trial_runner.hpp"

namespace knobtune {

enum class HintTemplate { Absolute, RelativeToRam, RelativeToCpu };

std::string to_string(HintTemplate t);

/// Tuning knowledge for one knob. `base` and the optional structured fields
/// are in template units: a physical value (absolute), a fraction of RAM, or
/// a per-core quantity.
struct HintEntry {
  std::string knob;
  HintTemplate tmpl = HintTemplate::Absolute;
  double base = 0.0;
  std::vector<double> suggested_values;
  std::optional<double> min_value;
  std::optional<double> max_value;
  std::optional<double> special_value;
  std::string provenance;

  json to_json() const;
};

std::vector<HintEntry> parse_hints(const json& j, const KnobCatalog& catalog);
std::vector<HintEntry> load_hints(const std::filesystem::path& path, const KnobCatalog& catalog);

/// Physical value of `amount` template units, before clamping.
double apply_template(HintTemplate tmpl, double amount, const HardwareProfile& hw);

/// Resolves a template-unit amount for the entry's knob, clamped and quantized.
KnobValue resolve_amount(const HintEntry& entry, double amount, const HardwareProfile& hw, const KnobCatalog& catalog);

KnobValue resolve_hint(const HintEntry& entry, const HardwareProfile& hw, const KnobCatalog& catalog);

inline constexpr std::array<double, 5> kHintFactors{0.25, 0.5, 1.0, 2.0, 4.0};
inline constexpr std::array<double, 5> kHintWeights{1.0, 2.0, 4.0, 8.0, 16.0};
inline constexpr std::size_t kIdentityFactorLevel = 2;

/// Per-entry (factor, weight) choice, stored as indices into kHintFactors / kHintWeights.
struct HintAction {
  std::vector<std::size_t> factor_level;
  std::vector<std::size_t> weight_level;

  static HintAction identity(std::size_t entries);
  double factor(std::size_t e) const { return kHintFactors.at(factor_level.at(e)); }
  double weight(std::size_t e) const { return kHintWeights.at(weight_level.at(e)); }
  std::size_t size() const { return factor_level.size(); }
};

/// Starts from `base` and sets every hinted knob to the weight-averaged f * v
/// over its hints, clamped to bounds. Unhinted knobs are untouched.
Configuration compose_configuration(const std::vector<HintEntry>& entries, const HintAction& action,
                                    const Configuration& base, const KnobCatalog& catalog, const HardwareProfile& hw);

/// Chooses hint actions online. Swappable so another learner can be plugged in.
class HintController {
 public:
  virtual ~HintController() = default;
  virtual HintAction propose(std::size_t step, Rng& rng) = 0;
  virtual void observe(const HintAction& action, double reward) = 0;
};

/// Epsilon-greedy action-value learning over the discrete factor and weight
/// levels, one estimate table per hint. Step 0 is always the pure-hint action.
class EpsilonGreedyHintController final : public HintController {
 public:
  EpsilonGreedyHintController(std::size_t entries, double epsilon0 = 0.5, double decay = 0.8);

  HintAction propose(std::size_t step, Rng& rng) override;
  void observe(const HintAction& action, double reward) override;

  double epsilon(std::size_t step) const;
  const std::vector<std::array<double, 5>>& factor_values() const { return qf_; }
  const std::vector<std::array<double, 5>>& weight_values() const { return qw_; }

 private:
  std::size_t entries_;
  double epsilon0_;
  double decay_;
  std::vector<std::array<double, 5>> qf_, qw_;
  std::vector<std::array<std::size_t, 5>> nf_, nw_;
};

struct HintTuneOptions {
  double epsilon0 = 0.5;
  double epsilon_decay = 0.8;
};

/// Runs `budget` hint-guided trials from `base`. `base_fitness` is the
/// measured fitness of `base` when it was evaluated; when absent the first
/// trial's fitness is the reward reference.
StageOutcome hint_tune(TrialRunner& runner, const std::vector<HintEntry>& entries, const HardwareProfile& hw,
                       std::size_t budget, const Configuration& base, std::optional<double> base_fitness,
                       std::uint64_t seed, const HintTuneOptions& options = {},
                       std::vector<HintAction>* actions_taken = nullptr);

}  // namespace knobtune
