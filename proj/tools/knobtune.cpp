// knobtune: command-line front end for tuning runs.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "knobtune/pipeline.hpp"
#include "knobtune/synthetic.hpp"

namespace fs = std::filesystem;
using namespace knobtune;

namespace {

std::string absolute_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

// driver commands are kept verbatim; synthetic spec paths are made absolute
std::string absolute_env(const std::string& env) {
  const std::string prefix = "synthetic:";
  if (env.rfind(prefix, 0) == 0) return prefix + absolute_path(env.substr(prefix.size()));
  return env;
}

struct PlanFlags {
  std::string catalog, schema, env, workload, hardware, hints, stage2 = "db", out;
  std::optional<std::size_t> budget_lhs, budget_stage2, budget_td3, topk, pca_k;
  std::optional<double> trust_ratio, pca_var;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stop_after;
  bool resume = false;
  bool quiet = false;
};

void add_plan_flags(CLI::App* cmd, PlanFlags& f, bool with_lhs) {
  cmd->add_option("--catalog", f.catalog, "knob catalog JSON");
  cmd->add_option("--schema", f.schema, "metric schema JSON");
  cmd->add_option("--env", f.env, "synthetic:<spec.json> or driver:<command>");
  cmd->add_option("--workload", f.workload, "workload JSON");
  cmd->add_option("--hardware", f.hardware, "hardware profile JSON");
  cmd->add_option("--hints", f.hints, "hint file JSON");
  if (with_lhs) {
    cmd->add_option("--stage2", f.stage2, "stage-2 backend")->check(CLI::IsMember({"db", "gp"}));
    cmd->add_option("--budget-lhs", f.budget_lhs, "stage-1 trials (default 120)");
    cmd->add_option("--trust-ratio", f.trust_ratio, "stage-1 trust region half-width (default 0.05)");
  }
  cmd->add_option("--budget-stage2", f.budget_stage2, "stage-2 trials");
  cmd->add_option("--budget-td3", f.budget_td3, "stage-3 trials");
  cmd->add_option("--topk", f.topk, "knobs tuned by TD3 (default 20)");
  auto* var = cmd->add_option("--pca-var", f.pca_var, "PCA explained-variance target (default 0.95)");
  auto* k = cmd->add_option("--pca-k", f.pca_k, "fixed PCA component count");
  var->excludes(k);
  cmd->add_option("--seed", f.seed, "master seed (default 0)");
  cmd->add_option("--out", f.out, "run directory")->required();
  cmd->add_flag("--resume", f.resume, "continue the run stored in --out");
  cmd->add_option("--stop-after", f.stop_after, "stop after this many new evaluations (resume later)");
  cmd->add_flag("-q,--quiet", f.quiet, "no per-trial log");
}

void apply_flags(const PlanFlags& f, RunPlan& p) {
  if (!f.catalog.empty()) p.catalog = absolute_path(f.catalog);
  if (!f.schema.empty()) p.schema = absolute_path(f.schema);
  if (!f.env.empty()) p.env = absolute_env(f.env);
  if (!f.workload.empty()) p.workload = absolute_path(f.workload);
  if (!f.hardware.empty()) p.hardware = absolute_path(f.hardware);
  if (!f.hints.empty()) p.hints = absolute_path(f.hints);
  if (f.budget_lhs) p.budget_lhs = *f.budget_lhs;
  if (f.budget_stage2) p.budget_stage2 = *f.budget_stage2;
  if (f.budget_td3) p.budget_td3 = *f.budget_td3;
  if (f.trust_ratio) p.trust_ratio = *f.trust_ratio;
  if (f.topk) p.topk = *f.topk;
  if (f.pca_var) p.pca = PcaTarget::variance(*f.pca_var);
  if (f.pca_k) p.pca = PcaTarget::fixed(*f.pca_k);
  if (f.seed) p.seed = *f.seed;
  p.out = absolute_path(f.out);
}

RunOptions run_options(const PlanFlags& f) {
  RunOptions o;
  o.resume = f.resume;
  o.new_trial_limit = f.stop_after;
  o.log = f.quiet ? nullptr : &std::cerr;
  return o;
}

void print_summary(const json& report) {
  const json& best = report.at("best");
  std::cout << "trials: " << report.at("trials").get<std::size_t>() << '\n';
  for (const auto& s : report.at("stages")) {
    std::cout << "  " << s.at("stage").get<std::string>() << ": " << s.at("trials").get<std::size_t>() << " trials";
    if (!s.at("best_fitness").is_null()) {
      std::cout << ", best " << s.at("best_fitness").get<double>() << " at step " << s.at("steps_to_best").get<std::size_t>();
    }
    std::cout << '\n';
  }
  std::cout << "best fitness " << best.at("fitness").get<double>() << " (trial " << best.at("trial").get<std::uint64_t>()
            << ", tps " << best.at("tps").get<double>() << ", p95 " << best.at("p95_ms").get<double>() << " ms)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knobtune: three-stage database knob tuning"};
  app.require_subcommand(1);

  PlanFlags tune_flags;
  auto* tune = app.add_subcommand("tune", "run LHS warm start, hint stage and TD3 fine-tuning");
  add_plan_flags(tune, tune_flags, true);

  PlanFlags transfer_flags;
  std::string from;
  auto* transfer = app.add_subcommand("transfer", "reuse an earlier run on new hardware");
  add_plan_flags(transfer, transfer_flags, false);
  transfer->add_option("--from", from, "source run directory");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-emit report.json and series.csv for a run");
  report->add_option("--out", report_dir, "run directory")->required();

  std::string refit_dir;
  auto* refit = app.add_subcommand("refit", "refit forest and PCA on the whole pool");
  refit->add_option("--out", refit_dir, "run directory")->required();

  PlanFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "brute-force optimum of a synthetic environment");
  oracle->add_option("--catalog", oracle_flags.catalog)->required();
  oracle->add_option("--schema", oracle_flags.schema)->required();
  oracle->add_option("--env", oracle_flags.env)->required();
  oracle->add_option("--workload", oracle_flags.workload)->required();
  oracle->add_option("--hardware", oracle_flags.hardware)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tune) {
      RunPlan plan;
      plan.backend = parse_backend(tune_flags.stage2);
      apply_flags(tune_flags, plan);
      print_summary(run_tune(plan, run_options(tune_flags)));
    } else if (*transfer) {
      RunPlan plan = transfer_plan_defaults();
      if (!transfer_flags.resume) {
        if (from.empty()) throw ValidationError("transfer needs --from <run dir>");
        // Inputs not given on the command line come from the source run.
        const RunPlan source = RunPlan::from_json(read_json_file(fs::path(from) / "plan.json"));
        plan.catalog = source.catalog;
        plan.schema = source.schema;
        plan.env = source.env;
        plan.workload = source.workload;
        plan.hardware = source.hardware;
        plan.hints = source.hints;
        plan.topk = source.topk;
        plan.pca = source.pca;
        plan.seed = source.seed;
        plan.transfer_from = absolute_path(from);
      }
      apply_flags(transfer_flags, plan);
      print_summary(semi_transfer(plan, run_options(transfer_flags)));
    } else if (*report) {
      print_summary(emit_report(report_dir));
    } else if (*refit) {
      std::cout << refit_models(refit_dir).dump(2) << '\n';
    } else if (*oracle) {
      const KnobCatalog catalog = load_catalog(oracle_flags.catalog);
      const MetricSchema schema = load_schema(oracle_flags.schema);
      const std::string prefix = "synthetic:";
      if (oracle_flags.env.rfind(prefix, 0) != 0) throw ValidationError("oracle needs --env synthetic:<spec.json>");
      SyntheticModelSpec spec = load_synthetic_spec(oracle_flags.env.substr(prefix.size()), catalog, schema);
      spec.hardware = load_hardware(oracle_flags.hardware);
      const auto [v, fitness] = synthetic_optimum(spec, load_workload(oracle_flags.workload));
      json out{{"fitness", fitness}, {"normalized", v}, {"config", to_json(denormalize(catalog, v).physical)}};
      std::cout << out.dump(2) << '\n';
    }
  } catch (const RunInterrupted& e) {
    std::cerr << "stopped: " << e.what() << " (continue with --resume)\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
