#include "knobtune/hints.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace knobtune {

std::string to_string(HintTemplate t) {
  switch (t) {
    case HintTemplate::Absolute: return "absolute";
    case HintTemplate::RelativeToRam: return "relative_to_ram";
    case HintTemplate::RelativeToCpu: return "relative_to_cpu";
  }
  return "?";
}

json HintEntry::to_json() const {
  json j{{"knob", knob}, {"template", to_string(tmpl)}, {"base", base}, {"provenance", provenance}};
  if (!suggested_values.empty()) j["suggested_values"] = suggested_values;
  if (min_value) j["min_value"] = *min_value;
  if (max_value) j["max_value"] = *max_value;
  if (special_value) j["special_value"] = *special_value;
  return j;
}

std::vector<HintEntry> parse_hints(const json& j, const KnobCatalog& catalog) {
  if (!j.is_array()) throw ParseError("hint file must be a JSON array");
  std::vector<HintEntry> entries;
  std::vector<std::string> unknown;
  for (const auto& o : j) {
    HintEntry e;
    try {
      e.knob = o.at("knob").get<std::string>();
      const auto t = o.at("template").get<std::string>();
      if (t == "absolute") e.tmpl = HintTemplate::Absolute;
      else if (t == "relative_to_ram") e.tmpl = HintTemplate::RelativeToRam;
      else if (t == "relative_to_cpu") e.tmpl = HintTemplate::RelativeToCpu;
      else throw ParseError("hint for '" + e.knob + "': unknown template '" + t + "'");
      e.base = o.at("base").get<double>();
      e.suggested_values = o.value("suggested_values", std::vector<double>{});
      if (o.contains("min_value") && !o["min_value"].is_null()) e.min_value = o["min_value"].get<double>();
      if (o.contains("max_value") && !o["max_value"].is_null()) e.max_value = o["max_value"].get<double>();
      if (o.contains("special_value") && !o["special_value"].is_null()) e.special_value = o["special_value"].get<double>();
      e.provenance = o.value("provenance", std::string());
    } catch (const json::exception& ex) {
      throw ParseError(std::string("hint entry: ") + ex.what());
    }

    auto idx = catalog.index_of(e.knob);
    if (!idx) {
      unknown.push_back(e.knob);
      continue;
    }
    if (!catalog[*idx].is_numeric()) throw ValidationError("hint for '" + e.knob + "': knob is not numeric");
    if (!std::isfinite(e.base)) throw ValidationError("hint for '" + e.knob + "': non-finite base");
    if (e.tmpl == HintTemplate::RelativeToRam && !(e.base > 0.0 && e.base <= 1.5)) {
      throw ValidationError("hint for '" + e.knob + "': relative_to_ram base must be in (0, 1.5]");
    }
    if (e.tmpl == HintTemplate::RelativeToCpu && !(e.base > 0.0)) {
      throw ValidationError("hint for '" + e.knob + "': relative_to_cpu base must be > 0");
    }
    if (e.min_value && e.max_value && *e.min_value > *e.max_value) {
      throw ValidationError("hint for '" + e.knob + "': min_value > max_value");
    }
    entries.push_back(std::move(e));
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& n : unknown) names += (names.empty() ? "" : ", ") + n;
    throw ValidationError("hints reference unknown knobs: " + names);
  }
  return entries;
}

std::vector<HintEntry> load_hints(const std::filesystem::path& path, const KnobCatalog& catalog) {
  return parse_hints(read_json_file(path), catalog);
}

double apply_template(HintTemplate tmpl, double amount, const HardwareProfile& hw) {
  switch (tmpl) {
    case HintTemplate::Absolute: return amount;
    case HintTemplate::RelativeToRam: return amount * static_cast<double>(hw.ram_bytes);
    case HintTemplate::RelativeToCpu: return amount * static_cast<double>(hw.cpu_cores);
  }
  return amount;
}

KnobValue resolve_amount(const HintEntry& entry, double amount, const HardwareProfile& hw, const KnobCatalog& catalog) {
  return catalog.at(entry.knob).clamp_numeric(apply_template(entry.tmpl, amount, hw));
}

KnobValue resolve_hint(const HintEntry& entry, const HardwareProfile& hw, const KnobCatalog& catalog) {
  return resolve_amount(entry, entry.base, hw, catalog);
}

HintAction HintAction::identity(std::size_t entries) {
  return HintAction{std::vector<std::size_t>(entries, kIdentityFactorLevel), std::vector<std::size_t>(entries, 0)};
}

Configuration compose_configuration(const std::vector<HintEntry>& entries, const HintAction& action,
                                    const Configuration& base, const KnobCatalog& catalog, const HardwareProfile& hw) {
  if (action.factor_level.size() != entries.size() || action.weight_level.size() != entries.size()) {
    throw DimensionError("compose_configuration: action does not cover the hint entries");
  }
  struct Acc {
    double weighted = 0.0;
    double weights = 0.0;
  };
  std::map<std::string, Acc> per_knob;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& knob = catalog.at(entries[e].knob);
    const double v = knob.numeric(resolve_hint(entries[e], hw, catalog));
    auto& acc = per_knob[entries[e].knob];
    acc.weighted += action.weight(e) * action.factor(e) * v;
    acc.weights += action.weight(e);
  }
  PhysicalConfig physical = base.physical;
  for (const auto& [name, acc] : per_knob) physical[name] = catalog.at(name).clamp_numeric(acc.weighted / acc.weights);
  return from_physical(catalog, physical);
}

// ---------------------------------------------------------------- controller

EpsilonGreedyHintController::EpsilonGreedyHintController(std::size_t entries, double epsilon0, double decay)
    : entries_(entries), epsilon0_(epsilon0), decay_(decay), qf_(entries), qw_(entries), nf_(entries), nw_(entries) {
  for (std::size_t e = 0; e < entries; ++e) {
    qf_[e].fill(0.0);
    qw_[e].fill(0.0);
    nf_[e].fill(0);
    nw_[e].fill(0);
  }
}

double EpsilonGreedyHintController::epsilon(std::size_t step) const {
  return step == 0 ? 0.0 : epsilon0_ * std::pow(decay_, static_cast<double>(step - 1));
}

namespace {

// Greedy choice; ties prefer levels in `preference` order.
std::size_t greedy(const std::array<double, 5>& q, const std::array<std::size_t, 5>& preference) {
  std::size_t best = preference[0];
  for (std::size_t level : preference) {
    if (q[level] > q[best]) best = level;
  }
  return best;
}

constexpr std::array<std::size_t, 5> kFactorPreference{2, 1, 3, 0, 4};
constexpr std::array<std::size_t, 5> kWeightPreference{0, 1, 2, 3, 4};

}  // namespace

HintAction EpsilonGreedyHintController::propose(std::size_t step, Rng& rng) {
  if (step == 0) return HintAction::identity(entries_);
  const double eps = epsilon(step);
  HintAction a;
  a.factor_level.resize(entries_);
  a.weight_level.resize(entries_);
  for (std::size_t e = 0; e < entries_; ++e) {
    a.factor_level[e] = rng.uniform() < eps ? rng.below(5) : greedy(qf_[e], kFactorPreference);
    a.weight_level[e] = rng.uniform() < eps ? rng.below(5) : greedy(qw_[e], kWeightPreference);
  }
  return a;
}

void EpsilonGreedyHintController::observe(const HintAction& action, double reward) {
  double mean_w = 0.0;
  for (std::size_t e = 0; e < entries_; ++e) mean_w += action.weight(e);
  mean_w /= static_cast<double>(std::max<std::size_t>(entries_, 1));
  for (std::size_t e = 0; e < entries_; ++e) {
    const double credit = reward * action.weight(e) / mean_w;
    const std::size_t f = action.factor_level[e];
    const std::size_t w = action.weight_level[e];
    qf_[e][f] += (credit - qf_[e][f]) / static_cast<double>(++nf_[e][f]);
    qw_[e][w] += (credit - qw_[e][w]) / static_cast<double>(++nw_[e][w]);
  }
}

// ---------------------------------------------------------------- stage loop

StageOutcome hint_tune(TrialRunner& runner, const std::vector<HintEntry>& entries, const HardwareProfile& hw,
                       std::size_t budget, const Configuration& base, std::optional<double> base_fitness,
                       std::uint64_t seed, const HintTuneOptions& options, std::vector<HintAction>* actions_taken) {
  if (budget < 1) throw ValidationError("hint_tune: budget must be >= 1");
  if (entries.empty()) throw ValidationError("hint_tune: no hint entries");
  const KnobCatalog& catalog = runner.catalog();
  EpsilonGreedyHintController controller(entries.size(), options.epsilon0, options.epsilon_decay);
  StageTracker tracker(base, base_fitness);
  std::optional<double> reference = base_fitness;

  for (std::size_t step = 0; step < budget; ++step) {
    Rng rng(derive_seed(seed, 0x68696e74ULL, step));
    const HintAction action = controller.propose(step, rng);
    if (actions_taken) actions_taken->push_back(action);
    const Configuration config = compose_configuration(entries, action, base, catalog, hw);
    const Sample* sample = runner.run(config.normalized, Stage::Hint);
    if (!sample) {
      tracker.count_failure();
      continue;
    }
    tracker.offer(*sample, catalog);
    if (!reference) reference = sample->fitness;
    const double reward = *reference > 0.0 ? (sample->fitness - *reference) / *reference : 0.0;
    controller.observe(action, reward);
  }
  return tracker.outcome();
}

}  // namespace knobtune
