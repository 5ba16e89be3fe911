#include "knobtune/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "knobtune/driver.hpp"
#include "knobtune/sampling.hpp"
#include "knobtune/synthetic.hpp"

namespace knobtune {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kLhsStream = 0x6c6873ULL;
constexpr std::uint64_t kStage2Stream = 0x737461676532ULL;
constexpr std::uint64_t kForestStream = 0x666f72657374ULL;
constexpr std::uint64_t kTd3Stream = 0x746433ULL;

int stage_rank(Stage s) {
  switch (s) {
    case Stage::Lhs: return 0;
    case Stage::Hint:
    case Stage::Coarse: return 1;
    case Stage::Td3: return 2;
  }
  return 0;
}

/// Best non-stale sample recorded before trial index `before`.
const Sample* best_before(const SamplePool& pool, std::uint64_t before) {
  const Sample* best = nullptr;
  for (const auto& s : pool.samples()) {
    if (s.trial_index >= before || s.seed_info.stale) continue;
    if (!best || s.fitness > best->fitness) best = &s;
  }
  return best;
}

void log_line(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n';
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Stage2Backend b) { return b == Stage2Backend::Db ? "db" : "gp"; }

Stage2Backend parse_backend(const std::string& s) {
  if (s == "db") return Stage2Backend::Db;
  if (s == "gp") return Stage2Backend::Gp;
  throw ParseError("unknown stage-2 backend '" + s + "' (expected db or gp)");
}

std::size_t RunPlan::stage2_budget() const {
  if (budget_stage2) return *budget_stage2;
  return backend == Stage2Backend::Db ? 5 : 50;
}

void RunPlan::validate() const {
  if (catalog.empty() || schema.empty() || env.empty() || workload.empty() || hardware.empty()) {
    throw ValidationError("plan: catalog, schema, env, workload and hardware are required");
  }
  if (out.empty()) throw ValidationError("plan: output directory is required");
  if (!(trust_ratio > 0.0 && trust_ratio <= 1.0)) throw ValidationError("plan: trust ratio must be in (0, 1]");
  if (topk < 1) throw ValidationError("plan: topk must be >= 1");
  if (pca.kind == PcaTarget::Kind::Variance && !(pca.fraction > 0.0 && pca.fraction <= 1.0)) {
    throw ValidationError("plan: PCA variance fraction must be in (0, 1]");
  }
  if (pca.kind == PcaTarget::Kind::Components && pca.components < 1) throw ValidationError("plan: PCA k must be >= 1");
  if (!transfer_from && budget_lhs + stage2_budget() + budget_td3 == 0) {
    throw ValidationError("plan: every stage has a zero budget");
  }
}

json RunPlan::to_json() const {
  json j{{"catalog", catalog},
         {"schema", schema},
         {"env", env},
         {"workload", workload},
         {"hardware", hardware},
         {"hints", hints ? json(*hints) : json(nullptr)},
         {"stage2", to_string(backend)},
         {"budget_lhs", budget_lhs},
         {"budget_stage2", stage2_budget()},
         {"budget_td3", budget_td3},
         {"trust_ratio", trust_ratio},
         {"topk", topk},
         {"seed", seed},
         {"out", out},
         {"first_trial", first_trial}};
  if (pca.kind == PcaTarget::Kind::Variance) {
    j["pca"] = json{{"variance", pca.fraction}};
  } else {
    j["pca"] = json{{"k", pca.components}};
  }
  if (transfer_from) j["transfer_from"] = *transfer_from;
  return j;
}

RunPlan RunPlan::from_json(const json& j) {
  RunPlan p;
  try {
    p.catalog = j.at("catalog").get<std::string>();
    p.schema = j.at("schema").get<std::string>();
    p.env = j.at("env").get<std::string>();
    p.workload = j.at("workload").get<std::string>();
    p.hardware = j.at("hardware").get<std::string>();
    if (j.contains("hints") && !j.at("hints").is_null()) p.hints = j.at("hints").get<std::string>();
    p.backend = parse_backend(j.at("stage2").get<std::string>());
    p.budget_lhs = j.at("budget_lhs").get<std::size_t>();
    p.budget_stage2 = j.at("budget_stage2").get<std::size_t>();
    p.budget_td3 = j.at("budget_td3").get<std::size_t>();
    p.trust_ratio = j.at("trust_ratio").get<double>();
    p.topk = j.at("topk").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.out = j.at("out").get<std::string>();
    p.first_trial = j.value("first_trial", std::uint64_t{0});
    const json& pc = j.at("pca");
    p.pca = pc.contains("k") ? PcaTarget::fixed(pc.at("k").get<std::size_t>())
                             : PcaTarget::variance(pc.at("variance").get<double>());
    if (j.contains("transfer_from")) p.transfer_from = j.at("transfer_from").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
  p.validate();
  return p;
}

RunPlan transfer_plan_defaults() {
  RunPlan p;
  p.backend = Stage2Backend::Db;
  p.budget_lhs = 0;
  p.budget_stage2 = 15;
  p.budget_td3 = 15;
  return p;
}

std::unique_ptr<Environment> make_environment(const std::string& env_spec, const KnobCatalog& catalog,
                                              const MetricSchema& schema, const HardwareProfile& hardware) {
  const auto colon = env_spec.find(':');
  const std::string kind = env_spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : env_spec.substr(colon + 1);
  if (arg.empty()) throw ParseError("environment spec '" + env_spec + "' needs synthetic:<spec.json> or driver:<command>");
  if (kind == "synthetic") {
    SyntheticModelSpec spec = load_synthetic_spec(arg, catalog, schema);
    spec.hardware = hardware;
    return std::make_unique<SyntheticEnvironment>(std::move(spec));
  }
  if (kind == "driver") return std::make_unique<DriverEnvironment>(catalog, schema, arg);
  throw ParseError("unknown environment kind '" + kind + "'");
}

RunContext open_context(const RunPlan& plan) {
  RunContext ctx{load_catalog(plan.catalog), load_schema(plan.schema), load_workload(plan.workload),
                 load_hardware(plan.hardware), nullptr, {}};
  if (plan.hints) ctx.hints = load_hints(*plan.hints, ctx.catalog);
  ctx.env = make_environment(plan.env, ctx.catalog, ctx.schema, ctx.hardware);
  return ctx;
}

StageOutcome run_stage1(const RunPlan& plan, TrialRunner& runner) {
  const KnobCatalog& catalog = runner.catalog();
  const Configuration center = default_configuration(catalog);
  StageTracker tracker(center, std::nullopt);
  if (plan.budget_lhs == 0) return tracker.outcome();
  const auto points =
      lhs_sample(LHSPlan{catalog.dimension(), plan.budget_lhs, derive_seed(plan.seed, kLhsStream, 0), StratumPlacement::Random});
  const TrustRegion region{center.normalized, plan.trust_ratio};
  for (const auto& p : points) {
    const Sample* s = runner.run(clip_to_trust_region(region, p), Stage::Lhs);
    if (s) {
      tracker.offer(*s, catalog);
    } else {
      tracker.count_failure();
    }
  }
  return tracker.outcome();
}

StageOutcome run_stage2(const RunPlan& plan, TrialRunner& runner, const std::vector<HintEntry>& hints,
                        const HardwareProfile& hardware, std::size_t budget) {
  const KnobCatalog& catalog = runner.catalog();
  Configuration base = default_configuration(catalog);
  std::optional<double> base_fitness;
  if (const Sample* b = best_before(runner.pool(), runner.next_trial())) {
    base = denormalize(catalog, b->action);
    base_fitness = b->fitness;
  }
  if (budget == 0) return StageTracker(base, base_fitness).outcome();
  if (hints.empty()) throw ValidationError("stage 2 needs a hint file (--hints)");
  const std::uint64_t seed = derive_seed(plan.seed, kStage2Stream, 0);
  if (plan.backend == Stage2Backend::Db) return hint_tune(runner, hints, hardware, budget, base, base_fitness, seed);
  const FeasibleSpace space = build_feasible_space(hints, catalog, hardware);
  return coarse_tune(runner, space, budget, base, base_fitness, seed);
}

ReducedSpace fit_reduced_space(const RunPlan& plan, const SamplePool& pool, const KnobCatalog& catalog,
                               bool include_stale) {
  const auto samples = pool.select(SampleFilter{Stage::Lhs, include_stale});
  if (samples.size() < 2) {
    throw InsufficientDataError("stage 3 needs at least 2 stage-1 samples to fit the forest and PCA, found " +
                                std::to_string(samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(catalog.dimension());
  const auto m = static_cast<Eigen::Index>(samples.front()->state.size());
  Eigen::MatrixXd X(n, d), S(n, m);
  std::vector<double> y(samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = *samples[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < d; ++c) X(i, c) = s.action[static_cast<std::size_t>(c)];
    for (Eigen::Index c = 0; c < m; ++c) S(i, c) = s.state[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(i)] = s.fitness;
  }
  ReducedSpace r;
  r.forest = forest_fit(ForestSpec{100, std::nullopt, 1, FeatureRule::All, true, derive_seed(plan.seed, kForestStream, 0)}, X, y);
  r.topk = select_topk(r.forest.importances, std::min(plan.topk, catalog.dimension()));
  PcaTarget target = plan.pca;
  r.pca = pca_fit(S, target);
  return r;
}

Stage3Result run_stage3(const RunPlan& plan, TrialRunner& runner, std::size_t budget, bool include_stale) {
  const KnobCatalog& catalog = runner.catalog();
  Stage3Result result{{}, fit_reduced_space(plan, runner.pool(), catalog, include_stale), std::nullopt};
  const Sample* start = best_before(runner.pool(), runner.next_trial());
  if (!start) throw InsufficientDataError("stage 3 needs at least one measured sample to start from");
  if (budget == 0) {
    result.outcome = StageTracker(denormalize(catalog, start->action), start->fitness).outcome();
    return result;
  }
  TD3Config cfg;
  cfg.seed = derive_seed(plan.seed, kTd3Stream, 0);
  result.agent.emplace(result.space.pca.k(), result.space.topk.size(), cfg);
  result.outcome = td3_tune(runner, *result.agent, result.space.pca, result.space.topk, budget, *start);
  return result;
}

namespace {

void write_models(const fs::path& dir, const ReducedSpace& space, const KnobCatalog& catalog) {
  fs::create_directories(dir / "models");
  write_json_file(dir / "models" / "forest.json", space.forest.to_json());
  write_json_file(dir / "models" / "pca.json", space.pca.to_json());
  json knobs = json::array();
  for (auto i : space.topk) {
    knobs.push_back(json{{"index", i}, {"name", catalog[i].name}, {"importance", space.forest.importances[i]}});
  }
  write_json_file(dir / "models" / "selection.json",
                  json{{"selected", knobs}, {"pca_k", space.pca.k()}, {"degenerate_forest", space.forest.degenerate}});
}

void write_agent(const fs::path& dir, const TD3Agent& agent) {
  fs::create_directories(dir / "agent");
  write_json_file(dir / "agent" / "td3.json", agent.checkpoint(false));
}

/// Prepares the run directory: fresh runs refuse to overwrite a pool,
/// resumed runs reload plan.json.
RunPlan prepare_run_dir(const RunPlan& requested, const RunOptions& options) {
  const fs::path dir = requested.out;
  if (options.resume) {
    if (!fs::exists(dir / "plan.json") || !fs::exists(dir / "pool.jsonl")) {
      throw ValidationError("cannot resume: " + dir.string() + " has no plan.json/pool.jsonl");
    }
    RunPlan stored = RunPlan::from_json(read_json_file(dir / "plan.json"));
    stored.out = requested.out;
    return stored;
  }
  if (fs::exists(dir / "pool.jsonl")) {
    throw ValidationError(dir.string() + " already holds a run; pass --resume or choose another --out");
  }
  requested.validate();
  fs::create_directories(dir);
  write_json_file(dir / "plan.json", requested.to_json());
  return requested;
}

}  // namespace

json run_tune(const RunPlan& requested, const RunOptions& options) {
  const RunPlan plan = prepare_run_dir(requested, options);
  if (plan.transfer_from) throw ValidationError("run directory holds a transfer run; resume it with the transfer verb");
  const fs::path dir = plan.out;
  RunContext ctx = open_context(plan);
  if (!options.resume) write_json_file(dir / "catalog.json", ctx.catalog.to_json());

  SamplePool pool = options.resume ? SamplePool::load(dir / "pool.jsonl")
                                   : SamplePool(ctx.catalog.fingerprint(), ctx.catalog.dimension(), ctx.hardware);
  pool.attach(dir / "pool.jsonl");
  TrialRunner runner(*ctx.env, pool, ctx.workload, plan.seed, 0);
  runner.set_new_trial_limit(options.new_trial_limit);
  runner.set_log(options.log);

  const StageOutcome s1 = run_stage1(plan, runner);
  log_line(options.log, "stage 1 done: " + std::to_string(s1.trials) + " trials");
  const StageOutcome s2 = run_stage2(plan, runner, ctx.hints, ctx.hardware, plan.stage2_budget());
  log_line(options.log, "stage 2 done: " + std::to_string(s2.trials) + " trials");
  if (plan.budget_td3 > 0) {
    const Stage3Result s3 = run_stage3(plan, runner, plan.budget_td3, false);
    write_models(dir, s3.space, ctx.catalog);
    if (s3.agent) write_agent(dir, *s3.agent);
    log_line(options.log, "stage 3 done: " + std::to_string(s3.outcome.trials) + " trials");
  }
  return emit_report(dir);
}

json semi_transfer(const RunPlan& requested, const RunOptions& options) {
  if (!requested.transfer_from && !options.resume) throw ValidationError("transfer needs a source run directory");
  RunPlan plan = requested;
  const fs::path dir = plan.out;
  std::optional<SamplePool> migrated;
  if (!options.resume) {
    const fs::path src = *plan.transfer_from;
    if (!fs::exists(src / "pool.jsonl") || !fs::exists(src / "catalog.json")) {
      throw ValidationError("source run " + src.string() + " lacks pool.jsonl or catalog.json");
    }
    const KnobCatalog old_catalog = KnobCatalog::from_json(read_json_file(src / "catalog.json"));
    const SamplePool old_pool = SamplePool::load(src / "pool.jsonl");
    const KnobCatalog new_catalog = load_catalog(plan.catalog);
    migrated = migrate_pool(old_pool, old_catalog, new_catalog, load_hardware(plan.hardware));
    plan.first_trial = migrated->next_trial_index();
    plan.budget_lhs = 0;
    plan.backend = Stage2Backend::Db;
  }
  plan = prepare_run_dir(plan, options);
  if (!plan.transfer_from) throw ValidationError("run directory does not hold a transfer run");
  RunContext ctx = open_context(plan);
  if (!options.resume) write_json_file(dir / "catalog.json", ctx.catalog.to_json());

  SamplePool pool = options.resume ? SamplePool::load(dir / "pool.jsonl") : std::move(*migrated);
  pool.attach(dir / "pool.jsonl");
  TrialRunner runner(*ctx.env, pool, ctx.workload, plan.seed, plan.first_trial);
  runner.set_new_trial_limit(options.new_trial_limit);
  runner.set_log(options.log);

  // Re-measure the best migrated configuration on the new environment; it is
  // the first Stage-2 trial and the baseline for the rest of the run.
  const Sample* seed_best = nullptr;
  for (const auto& s : pool.samples()) {
    if (s.seed_info.stale && (!seed_best || s.fitness > seed_best->fitness)) seed_best = &s;
  }
  if (!seed_best) throw InsufficientDataError("transfer: the migrated pool is empty");
  const std::vector<double> baseline_action = seed_best->action;
  runner.run(baseline_action, Stage::Hint);

  const std::size_t stage2 = plan.stage2_budget();
  if (stage2 > 1) run_stage2(plan, runner, ctx.hints, ctx.hardware, stage2 - 1);
  if (plan.budget_td3 > 0) {
    if (!best_before(pool, runner.next_trial())) throw EnvironmentError("transfer: every Stage-2 trial failed");
    const Stage3Result s3 = run_stage3(plan, runner, plan.budget_td3, true);
    write_models(dir, s3.space, ctx.catalog);
    if (s3.agent) write_agent(dir, *s3.agent);
  }
  return emit_report(dir);
}

json emit_report(const fs::path& dir) {
  const RunPlan plan = RunPlan::from_json(read_json_file(dir / "plan.json"));
  const KnobCatalog catalog = KnobCatalog::from_json(read_json_file(dir / "catalog.json"));
  const SamplePool pool = SamplePool::load(dir / "pool.jsonl");
  if (pool.catalog_fingerprint() != catalog.fingerprint()) throw ValidationError("report: pool/catalog fingerprint mismatch");

  std::vector<const Sample*> series = pool.select(SampleFilter{std::nullopt, false});
  if (series.empty()) throw InsufficientDataError("report: the run has no measured trials");

  std::string csv = "trial,stage,fitness,tps,p95_ms,qps,wall_s\n";
  for (const Sample* s : series) {
    csv += std::to_string(s->trial_index) + ',' + to_string(s->stage) + ',' + format_double(s->fitness) + ',' +
           format_double(s->perf.tps) + ',' + format_double(s->perf.p95_latency_ms) + ',' +
           format_double(s->perf.qps) + ',' + format_double(s->wall_time_s) + '\n';
  }
  {
    std::ofstream out(dir / "series.csv", std::ios::trunc);
    out << csv;
    if (!out) throw Error("cannot write " + (dir / "series.csv").string());
  }

  const Stage stage2 = plan.backend == Stage2Backend::Db ? Stage::Hint : Stage::Coarse;
  const std::vector<std::pair<Stage, std::size_t>> stages{
      {Stage::Lhs, plan.budget_lhs}, {stage2, plan.stage2_budget()}, {Stage::Td3, plan.budget_td3}};
  json summaries = json::array();
  std::optional<double> cumulative;
  for (const auto& [stage, budget] : stages) {
    json sj{{"stage", to_string(stage)}, {"budget", budget}};
    std::size_t count = 0, steps_to_best = 0;
    const Sample* best = nullptr;
    for (const Sample* s : series) {
      if (s->stage != stage) continue;
      ++count;
      if (!best || s->fitness > best->fitness) {
        best = s;
        steps_to_best = count;
      }
    }
    for (const Sample* s : series) {
      if (stage_rank(s->stage) <= stage_rank(stage) && (!cumulative || s->fitness > *cumulative)) cumulative = s->fitness;
    }
    sj["trials"] = count;
    sj["best_fitness"] = best ? json(best->fitness) : json(nullptr);
    sj["best_trial"] = best ? json(best->trial_index) : json(nullptr);
    sj["steps_to_best"] = steps_to_best;
    sj["best_so_far"] = cumulative ? json(*cumulative) : json(nullptr);
    if (stage == stage2) sj["backend"] = to_string(plan.backend);
    summaries.push_back(sj);
  }

  const Sample& best = pool.best_by_fitness(SampleFilter{std::nullopt, false});
  json models = json::object();
  if (fs::exists(dir / "models" / "selection.json")) {
    models["selection"] = read_json_file(dir / "models" / "selection.json");
    const PCAModel pca = PCAModel::from_json(read_json_file(dir / "models" / "pca.json"));
    models["pca_explained_variance_ratio"] = std::vector<double>(pca.explained_variance_ratio.data(),
                                                                 pca.explained_variance_ratio.data() + pca.k());
  }
  if (fs::exists(dir / "agent" / "td3.json")) models["agent_checkpoint"] = "agent/td3.json";

  const std::uint64_t attempted = pool.next_trial_index() - plan.first_trial;
  json report{{"plan", plan.to_json()},
              {"trials", series.size()},
              {"failed_trials", attempted - series.size()},
              {"total_budget", plan.budget_lhs + plan.stage2_budget() + plan.budget_td3},
              {"stages", summaries},
              {"best",
               {{"trial", best.trial_index},
                {"stage", to_string(best.stage)},
                {"fitness", best.fitness},
                {"tps", best.perf.tps},
                {"p95_ms", best.perf.p95_latency_ms},
                {"qps", best.perf.qps},
                {"normalized", best.action},
                {"config", to_json(denormalize(catalog, best.action).physical)}}},
              {"models", models}};
  write_json_file(dir / "report.json", report);
  return report;
}

json refit_models(const fs::path& dir) {
  const RunPlan plan = RunPlan::from_json(read_json_file(dir / "plan.json"));
  const KnobCatalog catalog = KnobCatalog::from_json(read_json_file(dir / "catalog.json"));
  const SamplePool pool = SamplePool::load(dir / "pool.jsonl");
  const auto samples = pool.select(SampleFilter{std::nullopt, true});
  if (samples.size() < 2) throw InsufficientDataError("refit needs at least 2 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto d = static_cast<Eigen::Index>(catalog.dimension());
  const auto m = static_cast<Eigen::Index>(samples.front()->state.size());
  Eigen::MatrixXd X(n, d), S(n, m);
  std::vector<double> y(samples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = *samples[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < d; ++c) X(i, c) = s.action[static_cast<std::size_t>(c)];
    for (Eigen::Index c = 0; c < m; ++c) S(i, c) = s.state[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(i)] = s.fitness;
  }
  const ForestModel forest =
      forest_fit(ForestSpec{100, std::nullopt, 1, FeatureRule::All, true, derive_seed(plan.seed, kForestStream, 1)}, X, y);
  const PCAModel pca = pca_fit(S, plan.pca);
  const auto topk = select_topk(forest.importances, std::min(plan.topk, catalog.dimension()));
  fs::create_directories(dir / "models");
  write_json_file(dir / "models" / "refit_forest.json", forest.to_json());
  write_json_file(dir / "models" / "refit_pca.json", pca.to_json());
  json knobs = json::array();
  for (auto i : topk) knobs.push_back(json{{"index", i}, {"name", catalog[i].name}, {"importance", forest.importances[i]}});
  json summary{{"samples", samples.size()}, {"selected", knobs}, {"pca_k", pca.k()}};
  write_json_file(dir / "models" / "refit_selection.json", summary);
  return summary;
}

}  // namespace knobtune
