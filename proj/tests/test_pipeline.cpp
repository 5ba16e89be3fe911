#include "doctest.h"

#include <fstream>
#include <sstream>

#include "knobtune/errors.hpp"
#include "knobtune/pipeline.hpp"
#include "knobtune/trial_runner.hpp"
#include "support.hpp"

using namespace knobtune;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

const json& stage_summary(const json& report, const std::string& stage) {
  for (const auto& s : report["stages"])
    if (s["stage"] == stage) return s;
  throw std::runtime_error("no summary for " + stage);
}

}  // namespace

TEST_CASE("full default run") {
  const auto dir = testing::scratch_dir("pipe_full");
  const auto report = run_tune(testing::synthetic_plan(dir / "run", 1));
  const fs::path run = dir / "run";
  for (const char* f : {"plan.json", "catalog.json", "pool.jsonl", "models/forest.json", "models/pca.json",
                        "models/selection.json", "agent/td3.json", "report.json", "series.csv"})
    CHECK(fs::exists(run / f));

  const auto rows = lines(slurp(run / "series.csv"));
  REQUIRE(rows.size() == 156);
  CHECK(rows[0] == "trial,stage,fitness,tps,p95_ms,qps,wall_s");
  CHECK(report["trials"] == 155);
  CHECK(report["total_budget"] == 155);
  CHECK(stage_summary(report, "lhs")["trials"] == 120);
  CHECK(stage_summary(report, "hint")["trials"] == 5);
  CHECK(stage_summary(report, "hint")["backend"] == "db");
  CHECK(stage_summary(report, "td3")["trials"] == 30);

  // Series rows reproduce the pool exactly and best values match its argmax.
  const auto pool = SamplePool::load(run / "pool.jsonl");
  REQUIRE(pool.size() == 155);
  for (std::size_t i = 0; i < 155; ++i) {
    std::stringstream ss(rows[i + 1]);
    std::string trial, stage, fit;
    std::getline(ss, trial, ',');
    std::getline(ss, stage, ',');
    std::getline(ss, fit, ',');
    CHECK(std::stoull(trial) == pool.samples()[i].trial_index);
    CHECK(stage == to_string(pool.samples()[i].stage));
    CHECK(std::stod(fit) == pool.samples()[i].fitness);
  }
  CHECK(report["best"]["fitness"].get<double>() == pool.best_by_fitness().fitness);
  CHECK(report["best"]["trial"] == pool.best_by_fitness().trial_index);

  double prev = 0.0;
  for (const char* st : {"lhs", "hint", "td3"}) {
    const double b = stage_summary(report, st)["best_so_far"].get<double>();
    CHECK(b >= prev);
    prev = b;
  }
  CHECK(prev == pool.best_by_fitness().fitness);

  const auto sel = report["models"]["selection"];
  CHECK(sel["selected"].size() == 20);
  double cum = 0.0;
  for (double r : report["models"]["pca_explained_variance_ratio"]) cum += r;
  CHECK(cum >= 0.95);
  CHECK(sel["pca_k"] == report["models"]["pca_explained_variance_ratio"].size());
  CHECK(report["models"]["agent_checkpoint"] == "agent/td3.json");
  CHECK(read_json_file(run / "agent/td3.json")["format"] == "knobtune-td3");
}

TEST_CASE("report re-emission is byte-identical and runs are reproducible") {
  const auto dir = testing::scratch_dir("pipe_repro");
  run_tune(testing::synthetic_plan(dir / "a", 5));
  const auto csv = slurp(dir / "a" / "series.csv");
  const auto rep = slurp(dir / "a" / "report.json");
  emit_report(dir / "a");
  CHECK(slurp(dir / "a" / "series.csv") == csv);
  CHECK(slurp(dir / "a" / "report.json") == rep);

  run_tune(testing::synthetic_plan(dir / "b", 5));
  CHECK(slurp(dir / "b" / "series.csv") == csv);
  CHECK(slurp(dir / "b" / "pool.jsonl") == slurp(dir / "a" / "pool.jsonl"));

  CHECK_THROWS_AS(run_tune(testing::synthetic_plan(dir / "a", 5)), ValidationError);
}

TEST_CASE("resume after an interruption reproduces the uninterrupted run") {
  const auto dir = testing::scratch_dir("pipe_resume");
  run_tune(testing::synthetic_plan(dir / "ref", 9));
  const auto want = slurp(dir / "ref" / "series.csv");
  for (std::size_t kill : {1u, 60u, 120u, 123u, 140u, 154u}) {
    CAPTURE(kill);
    const auto out = dir / ("k" + std::to_string(kill));
    RunOptions stop;
    stop.new_trial_limit = kill;
    CHECK_THROWS_AS(run_tune(testing::synthetic_plan(out, 9), stop), RunInterrupted);
    CHECK(SamplePool::load(out / "pool.jsonl").size() == kill);
    RunOptions resume;
    resume.resume = true;
    RunPlan bare;
    bare.out = out.string();
    run_tune(bare, resume);
    CHECK(slurp(out / "series.csv") == want);
    CHECK(slurp(out / "agent" / "td3.json") == slurp(dir / "ref" / "agent" / "td3.json"));
  }
}

TEST_CASE("gp backend runs fifty coarse trials") {
  const auto dir = testing::scratch_dir("pipe_gp");
  auto plan = testing::synthetic_plan(dir / "run", 2);
  plan.backend = Stage2Backend::Gp;
  const auto report = run_tune(plan);
  CHECK(report["trials"] == 200);
  CHECK(stage_summary(report, "coarse")["trials"] == 50);
  CHECK(stage_summary(report, "coarse")["backend"] == "gp");
}

TEST_CASE("stage budgets of zero") {
  const auto dir = testing::scratch_dir("pipe_zero");
  SUBCASE("stage 2 skipped") {
    auto plan = testing::synthetic_plan(dir / "s2", 3);
    plan.budget_stage2 = 0;
    plan.hints.reset();
    const auto report = run_tune(plan);
    CHECK(report["trials"] == 150);
    CHECK(stage_summary(report, "hint")["trials"] == 0);
    CHECK(stage_summary(report, "hint")["best_fitness"].is_null());
  }
  SUBCASE("stage 3 skipped writes no models") {
    auto plan = testing::synthetic_plan(dir / "s3", 3);
    plan.budget_td3 = 0;
    const auto report = run_tune(plan);
    CHECK(report["trials"] == 125);
    CHECK_FALSE(fs::exists(dir / "s3" / "models"));
    CHECK_FALSE(fs::exists(dir / "s3" / "agent"));
    CHECK(report["models"].empty());
  }
  SUBCASE("hint stage alone starts from the defaults") {
    auto plan = testing::synthetic_plan(dir / "h", 3);
    plan.budget_lhs = 0;
    plan.budget_td3 = 0;
    const auto report = run_tune(plan);
    CHECK(report["trials"] == 5);
    CHECK(stage_summary(report, "lhs")["trials"] == 0);
  }
  SUBCASE("stage 3 without stage-1 data is an error") {
    auto plan = testing::synthetic_plan(dir / "t", 3);
    plan.budget_lhs = 0;
    CHECK_THROWS_AS(run_tune(plan), InsufficientDataError);
  }
  SUBCASE("all zero") {
    auto plan = testing::synthetic_plan(dir / "z", 3);
    plan.budget_lhs = 0;
    plan.budget_stage2 = 0;
    plan.budget_td3 = 0;
    CHECK_THROWS_AS(run_tune(plan), ValidationError);
  }
  SUBCASE("hint backend needs hints") {
    auto plan = testing::synthetic_plan(dir / "nh", 3);
    plan.hints.reset();
    CHECK_THROWS_AS(run_tune(plan), ValidationError);
  }
}

TEST_CASE("trust ratio one leaves the design unclipped") {
  const auto dir = testing::scratch_dir("pipe_trust");
  auto plan = testing::synthetic_plan(dir / "run", 4);
  plan.trust_ratio = 1.0;
  plan.budget_stage2 = 0;
  plan.budget_td3 = 0;
  plan.budget_lhs = 40;
  run_tune(plan);
  const auto pool = SamplePool::load(dir / "run" / "pool.jsonl");
  // Every stratum of every dimension is hit, which clipping would prevent.
  const auto& sample0 = pool.samples()[0];
  std::size_t far = 0;
  for (const auto& s : pool.samples())
    for (std::size_t i = 0; i < s.action.size(); ++i) far += std::abs(s.action[i] - 0.5) > 0.3;
  CHECK(far > 40 * 50 / 4);
  (void)sample0;
}

TEST_CASE("266-knob catalog tunes twenty knobs") {
  const auto dir = testing::scratch_dir("pipe_266");
  auto plan = testing::synthetic_plan(dir / "run", 6);
  plan.catalog = testing::source_path("catalogs/mysql266.json").string();
  plan.hints = testing::source_path("hints/mysql_demo.json").string();
  const auto report = run_tune(plan);
  CHECK(report["trials"] == 155);
  CHECK(report["models"]["selection"]["selected"].size() == 20);
  const auto agent = TD3Agent::restore(read_json_file(dir / "run" / "agent" / "td3.json"));
  CHECK(agent.action_dim() == 20);
  CHECK(agent.critic1().spec().input_dim == 20 + agent.state_dim());
}

TEST_CASE("semi-transfer") {
  const auto dir = testing::scratch_dir("pipe_transfer");
  run_tune(testing::synthetic_plan(dir / "src", 7));
  const auto src_pool = SamplePool::load(dir / "src" / "pool.jsonl");

  auto transfer_plan = [&](const std::string& name) {
    RunPlan p = transfer_plan_defaults();
    const auto base = testing::synthetic_plan(dir / name, 7);
    p.catalog = base.catalog;
    p.schema = base.schema;
    p.env = base.env;
    p.workload = base.workload;
    p.hardware = testing::source_path("configs/hardware_12c32g.json").string();
    p.hints = base.hints;
    p.seed = 7;
    p.out = (dir / name).string();
    p.transfer_from = (dir / "src").string();
    return p;
  };

  SUBCASE("default budgets") {
    const auto report = semi_transfer(transfer_plan("t"));
    const auto pool = SamplePool::load(dir / "t" / "pool.jsonl");
    CHECK(pool.size() == src_pool.size() + 30);
    CHECK(report["trials"] == 30);
    CHECK(stage_summary(report, "lhs")["trials"] == 0);
    CHECK(stage_summary(report, "hint")["trials"] == 15);
    CHECK(stage_summary(report, "td3")["trials"] == 15);
    CHECK(lines(slurp(dir / "t" / "series.csv")).size() == 31);
    for (const auto& s : pool.samples()) {
      if (s.trial_index < src_pool.next_trial_index()) CHECK(s.seed_info.stale);
      else CHECK_FALSE(s.seed_info.stale);
    }
    CHECK(pool.hardware().ram_bytes == 32ull << 30);
    // The first new trial re-measures the best migrated configuration.
    const auto& first = pool.samples()[src_pool.size()];
    CHECK(first.action == migrate_pool(src_pool, KnobCatalog::from_json(read_json_file(dir / "src" / "catalog.json")),
                                       testing::synthetic_catalog(), pool.hardware())
                              .best_by_fitness()
                              .action);
  }
  SUBCASE("zero budgets keep only the re-evaluation") {
    auto p = transfer_plan("z");
    p.budget_stage2 = 0;
    p.budget_td3 = 0;
    const auto report = semi_transfer(p);
    CHECK(report["trials"] == 1);
    CHECK(lines(slurp(dir / "z" / "series.csv")).size() == 2);
  }
  SUBCASE("resume") {
    auto p = transfer_plan("r");
    RunOptions stop;
    stop.new_trial_limit = 20;
    CHECK_THROWS_AS(semi_transfer(p, stop), RunInterrupted);
    RunOptions resume;
    resume.resume = true;
    RunPlan bare;
    bare.out = p.out;
    semi_transfer(bare, resume);
    semi_transfer(transfer_plan("ref"));
    CHECK(slurp(dir / "r" / "series.csv") == slurp(dir / "ref" / "series.csv"));
  }
}

TEST_CASE("self-transfer stays within noise of the source best") {
  const auto dir = testing::scratch_dir("pipe_self");
  const double noise_sd = testing::synthetic_model().noise_sd;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto src = dir / ("src" + std::to_string(seed));
    const auto old = run_tune(testing::synthetic_plan(src, seed));
    RunPlan p = transfer_plan_defaults();
    const auto base = testing::synthetic_plan(dir / ("t" + std::to_string(seed)), seed);
    p.catalog = base.catalog;
    p.schema = base.schema;
    p.env = base.env;
    p.workload = base.workload;
    p.hardware = base.hardware;
    p.hints = base.hints;
    p.seed = seed;
    p.out = base.out;
    p.transfer_from = src.string();
    const auto now = semi_transfer(p);
    CHECK(now["best"]["fitness"].get<double>() >= old["best"]["fitness"].get<double>() * (1.0 - 2.0 * noise_sd));
  }
}

TEST_CASE("refit and plan serialization") {
  const auto dir = testing::scratch_dir("pipe_refit");
  auto plan = testing::synthetic_plan(dir / "run", 8);
  plan.budget_lhs = 30;
  plan.budget_td3 = 5;
  plan.pca = PcaTarget::fixed(4);
  run_tune(plan);
  const auto summary = refit_models(dir / "run");
  CHECK(summary["samples"] == 40);
  CHECK(summary["pca_k"] == 4);
  CHECK(fs::exists(dir / "run" / "models" / "refit_forest.json"));

  const auto back = RunPlan::from_json(plan.to_json());
  CHECK(back.to_json() == plan.to_json());
  CHECK(back.pca.kind == PcaTarget::Kind::Components);
  CHECK(back.stage2_budget() == 5);
  RunPlan gp = plan;
  gp.backend = Stage2Backend::Gp;
  gp.budget_stage2.reset();
  CHECK(gp.stage2_budget() == 50);
  CHECK_THROWS_AS(parse_backend("smac"), ParseError);
}

TEST_CASE("driver-backed run") {
  const auto dir = testing::scratch_dir("pipe_driver");
  write_json_file(dir / "catalog.json", testing::mixed_catalog().to_json());
  auto plan = testing::synthetic_plan(dir / "run", 1);
  plan.catalog = (dir / "catalog.json").string();
  plan.env = std::string("driver:") + FAKE_DRIVER_PATH + " ok 63";
  plan.hints.reset();
  plan.budget_lhs = 12;
  plan.budget_stage2 = 0;
  plan.budget_td3 = 4;
  plan.topk = 2;
  const auto report = run_tune(plan);
  CHECK(report["trials"] == 16);
  CHECK(report["failed_trials"] == 0);
}

TEST_CASE("failed driver trials are counted, not fatal") {
  const auto dir = testing::scratch_dir("pipe_flaky");
  write_json_file(dir / "catalog.json", testing::mixed_catalog().to_json());
  auto plan = testing::synthetic_plan(dir / "run", 1);
  plan.catalog = (dir / "catalog.json").string();
  plan.env = std::string("driver:") + FAKE_DRIVER_PATH + " flaky 63";
  plan.hints.reset();
  plan.budget_lhs = 10;
  plan.budget_stage2 = 0;
  plan.budget_td3 = 0;
  const auto report = run_tune(plan);
  CHECK(report["trials"] == 5);
  CHECK(report["failed_trials"] == 5);
}
