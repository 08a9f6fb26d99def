// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uclab/harness.hpp"

using namespace uclab;
namespace fs = std::filesystem;

namespace {

// Two buses, one line, three units with spread-out costs. Small enough that a
// full tree solve is a few milliseconds, structured enough that commitments
// move with the demand draw.
GridSystem small_system() {
  GridSystem sys;
  sys.n_periods = 4;
  sys.reference_bus = 1;
  sys.buses = {{1, {40.0, 80.0, 120.0, 60.0}}, {2, {30.0, 60.0, 90.0, 45.0}}};
  Branch line;
  line.id = 1;
  line.from_bus = 1;
  line.to_bus = 2;
  line.reactance = 0.1;
  line.flow_limit = 100.0;
  sys.branches = {line};
  Generator g1;
  g1.id = 1;
  g1.bus = 1;
  g1.p_min = 20.0;
  g1.p_max = 120.0;
  g1.ramp_hourly = 120.0;
  g1.ramp_10min = 0.0;
  g1.cost_energy = 10.0;
  g1.cost_noload = 20.0;
  g1.cost_startup = 50.0;
  g1.initial_status = 1;
  Generator g2 = g1;
  g2.id = 2;
  g2.bus = 2;
  g2.p_min = 10.0;
  g2.p_max = 100.0;
  g2.ramp_hourly = 100.0;
  g2.cost_energy = 25.0;
  g2.cost_noload = 15.0;
  g2.cost_startup = 80.0;
  g2.initial_status = 0;
  Generator g3 = g1;
  g3.id = 3;
  g3.bus = 2;
  g3.p_min = 5.0;
  g3.p_max = 80.0;
  g3.ramp_hourly = 80.0;
  g3.cost_energy = 60.0;
  g3.cost_noload = 5.0;
  g3.cost_startup = 30.0;
  g3.initial_status = 0;
  sys.generators = {g1, g2, g3};
  return sys;
}

Dataset small_dataset(const GridSystem& sys, int count, std::uint64_t seed) {
  NoiseParams np;
  np.master_seed = seed;
  auto ds = generate_dataset(sys, count, np);
  return shuffle_split(std::move(ds), 0.75, seed);
}

std::string fresh_dir(const std::string& slug) {
  auto dir = fs::temp_directory_path() / ("uclab-harness-" + slug);
  fs::remove_all(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("normalized metrics guard their reference") {
  REQUIRE(*normalized_sq(102.0, 100.0) == 102.0);
  REQUIRE(*normalized_sq(100.0, 100.0) == 100.0);
  REQUIRE(*normalized_st(0.5, 1.0) == 50.0);
  REQUIRE_FALSE(normalized_sq(5.0, 0.0).has_value());
  REQUIRE_FALSE(normalized_st(5.0, -1.0).has_value());
}

TEST_CASE("outcome rows survive the csv round trip") {
  std::vector<OutcomeRow> rows(3);
  rows[0].sample_id = 7;
  rows[0].procedure = ProcedureId::B1;
  rows[0].status = MipStatus::OptimalWithinGap;
  rows[0].has_objective = true;
  rows[0].objective = 1.0 / 3.0;
  rows[0].wall_time = 0.125;
  rows[0].nodes_explored = 42;
  rows[0].n_binary_vars = 24;
  rows[0].n_constraints = 96;
  rows[0].sq = 100.0;
  rows[0].st = 100.0;
  rows[1].sample_id = 7;
  rows[1].procedure = ProcedureId::P1;
  rows[1].status = MipStatus::Infeasible;
  rows[1].wall_time = 1e-17;
  rows[1].n_fixed_u = 5;
  rows[1].n_fixed_v = 3;
  rows[1].n_binary_vars = 16;
  rows[1].n_constraints = 96;
  rows[2].sample_id = 8;
  rows[2].procedure = ProcedureId::B2;
  rows[2].status = MipStatus::LimitReached;
  rows[2].has_objective = true;
  rows[2].objective = 1234.5678901234567;
  rows[2].wall_time = 0.25;

  auto path = (fs::temp_directory_path() / "uclab-harness-outcomes.csv").string();
  write_outcomes_csv(rows, path);
  auto back = read_outcomes_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    REQUIRE(back[i].sample_id == rows[i].sample_id);
    REQUIRE(back[i].procedure == rows[i].procedure);
    REQUIRE(back[i].status == rows[i].status);
    REQUIRE(back[i].has_objective == rows[i].has_objective);
    if (rows[i].has_objective) REQUIRE(back[i].objective == rows[i].objective);
    REQUIRE(back[i].wall_time == rows[i].wall_time);
    REQUIRE(back[i].nodes_explored == rows[i].nodes_explored);
    REQUIRE(back[i].n_fixed_u == rows[i].n_fixed_u);
    REQUIRE(back[i].n_fixed_v == rows[i].n_fixed_v);
    REQUIRE(back[i].n_binary_vars == rows[i].n_binary_vars);
    REQUIRE(back[i].n_constraints == rows[i].n_constraints);
    REQUIRE(back[i].sq == rows[i].sq);
    REQUIRE(back[i].st == rows[i].st);
  }

  std::ofstream(path, std::ios::binary) << "not,the,header\n";
  REQUIRE_THROWS_AS(read_outcomes_csv(path), ParseError);
  std::ofstream(path, std::ios::binary)
      << kOutcomesHeader << "\n7,b1,optimal-within-gap,abc,0,0,0,0,0,0,,\n";
  REQUIRE_THROWS_AS(read_outcomes_csv(path), ParseError);
  REQUIRE_THROWS_AS(read_outcomes_csv("/nonexistent/outcomes.csv"), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("sensitivity rows survive the csv round trip") {
  std::vector<SensitivityRow> rows(2);
  rows[0].threshold = 0.2;
  rows[0].procedure = ProcedureId::B2;
  rows[0].n_infeasible = 3;
  rows[0].n_feasible = 9;
  rows[0].mean_sq = 100.25;
  rows[0].mean_st = 7.0 / 9.0;
  rows[1].threshold = 0.9;
  rows[1].procedure = ProcedureId::P2;
  rows[1].n_infeasible = 12;
  rows[1].n_feasible = 0;

  auto path = (fs::temp_directory_path() / "uclab-harness-sensitivity.csv").string();
  write_sensitivity_csv(rows, path);
  auto back = read_sensitivity_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    REQUIRE(back[i].threshold == rows[i].threshold);
    REQUIRE(back[i].procedure == rows[i].procedure);
    REQUIRE(back[i].n_infeasible == rows[i].n_infeasible);
    REQUIRE(back[i].n_feasible == rows[i].n_feasible);
    REQUIRE(back[i].mean_sq == rows[i].mean_sq);
    REQUIRE(back[i].mean_st == rows[i].mean_st);
  }

  std::ofstream(path, std::ios::binary) << "wrong\n";
  REQUIRE_THROWS_AS(read_sensitivity_csv(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("aggregates average only rows with both normalized columns") {
  std::vector<OutcomeRow> rows(4);
  for (auto& r : rows) r.procedure = ProcedureId::P1;
  rows[0].status = MipStatus::OptimalWithinGap;
  rows[0].sq = 101.0;
  rows[0].st = 40.0;
  rows[0].nodes_explored = 10;
  rows[0].n_binary_vars = 8;
  rows[0].n_fixed_u = 4;
  rows[0].n_fixed_v = 2;
  rows[1].status = MipStatus::OptimalWithinGap;
  rows[1].sq = 99.0;
  rows[1].st = 60.0;
  rows[1].nodes_explored = 30;
  rows[1].n_binary_vars = 4;
  rows[1].n_fixed_u = 6;
  rows[1].n_fixed_v = 4;
  rows[2].status = MipStatus::Infeasible;  // no normalized columns
  rows[3].status = MipStatus::LimitReached;
  rows[3].nodes_explored = 500;

  auto agg = aggregate_outcomes(rows);
  const auto& a = agg.at(ProcedureId::P1);
  REQUIRE(a.n_rows == 4);
  REQUIRE(a.n_infeasible == 1);
  REQUIRE(a.n_limit == 1);
  REQUIRE(a.n_aggregated == 2);
  REQUIRE(a.mean_sq == 100.0);
  REQUIRE(a.mean_st == 50.0);
  REQUIRE(a.mean_nodes == 20.0);
  REQUIRE(a.mean_binary_vars == 6.0);
  REQUIRE(a.mean_fixed_u == 5.0);
  REQUIRE(a.mean_fixed_v == 3.0);
}

TEST_CASE("benchmark emits one labelled row per sample and procedure") {
  auto sys = small_system();
  auto ds = small_dataset(sys, 8, 21);
  auto ens = train_ensemble(ds);
  ens.threshold = tune_threshold(ens, ds, default_threshold_grid());

  auto rows = run_benchmark(sys, ds, ens);
  const auto n_test = ds.split.test_ids.size();
  REQUIRE(rows.size() == 4 * n_test);

  std::map<int, std::map<ProcedureId, OutcomeRow>> by_sample;
  for (const auto& r : rows) by_sample[r.sample_id][r.procedure] = r;
  REQUIRE(by_sample.size() == n_test);

  for (int id : ds.split.test_ids) {
    CAPTURE(id);
    auto& group = by_sample.at(id);
    REQUIRE(group.size() == 4);
    const auto& b1 = group.at(ProcedureId::B1);
    REQUIRE(b1.n_fixed_u == 0);
    REQUIRE(b1.n_fixed_v == 0);
    if (b1.status == MipStatus::OptimalWithinGap) {
      REQUIRE(*b1.sq == 100.0);
      REQUIRE(*b1.st == 100.0);
    }
    auto pred = predict(ens, ds.by_id(id).demand);
    for (auto proc : {ProcedureId::B2, ProcedureId::P1, ProcedureId::P2}) {
      const auto& r = group.at(proc);
      auto fc = fixing_counts(pred, proc);
      REQUIRE(r.n_fixed_u == fc.n_fixed_u);
      REQUIRE(r.n_fixed_v == fc.n_fixed_v);
      REQUIRE(r.n_binary_vars == b1.n_binary_vars - r.n_fixed_u - r.n_fixed_v);
      bool both_opt = b1.status == MipStatus::OptimalWithinGap &&
                      r.status == MipStatus::OptimalWithinGap;
      REQUIRE(r.sq.has_value() == both_opt);
      REQUIRE(r.st.has_value() == both_opt);
      if (both_opt) REQUIRE(*r.sq >= 100.0 * (1.0 - 2.0 * 0.01) - 1e-9);
    }
  }

  // B1 is forced in even when the caller leaves it out.
  BenchmarkOptions only_p1;
  only_p1.procedures = {ProcedureId::P1};
  auto p1_rows = run_benchmark(sys, ds, ens, only_p1);
  REQUIRE(p1_rows.size() == 2 * n_test);
  int b1_seen = 0;
  for (const auto& r : p1_rows) b1_seen += r.procedure == ProcedureId::B1;
  REQUIRE(b1_seen == static_cast<int>(n_test));

  auto unsplit = ds;
  unsplit.has_split = false;
  REQUIRE_THROWS_AS(run_benchmark(sys, unsplit, ens), ValidationError);
  auto stale = ens;
  stale.system_hash = "something-else";
  REQUIRE_THROWS_AS(run_benchmark(sys, ds, stale), ValidationError);
  auto moved = ds;
  moved.system_hash = "something-else";
  auto moved_ens = ens;
  moved_ens.system_hash = "something-else";
  REQUIRE_THROWS_AS(run_benchmark(sys, moved, moved_ens), ValidationError);
}

TEST_CASE("sensitivity reruns the test split per threshold") {
  auto sys = small_system();
  auto ds = small_dataset(sys, 8, 33);
  auto ens = train_ensemble(ds);
  ens.threshold = tune_threshold(ens, ds, default_threshold_grid());
  const int n_test = static_cast<int>(ds.split.test_ids.size());

  std::vector<double> grid = {0.2, 0.5, 0.8};
  auto table = threshold_sensitivity(sys, ds, ens, grid, {ProcedureId::P1});
  REQUIRE(table.size() == grid.size() * 2);
  for (std::size_t i = 0; i < table.size(); ++i) {
    CAPTURE(i);
    REQUIRE(table[i].threshold == grid[i / 2]);
    REQUIRE(table[i].procedure == (i % 2 == 0 ? ProcedureId::B2 : ProcedureId::P1));
    REQUIRE(table[i].n_infeasible + table[i].n_feasible == n_test);
    if (table[i].n_feasible == 0) REQUIRE_FALSE(table[i].mean_sq.has_value());
  }

  // Reusing benchmark rows for the B1 reference changes timings only.
  auto bench = run_benchmark(sys, ds, ens);
  auto reused = threshold_sensitivity(sys, ds, ens, grid, {ProcedureId::P1}, {}, &bench);
  REQUIRE(reused.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CAPTURE(i);
    REQUIRE(reused[i].n_infeasible == table[i].n_infeasible);
    REQUIRE(reused[i].n_feasible == table[i].n_feasible);
    REQUIRE(reused[i].mean_sq == table[i].mean_sq);
  }

  REQUIRE_THROWS_AS(threshold_sensitivity(sys, ds, ens, {}), ValidationError);
  REQUIRE_THROWS_AS(threshold_sensitivity(sys, ds, ens, {1.5}), ValidationError);
  auto unsplit = ds;
  unsplit.has_split = false;
  REQUIRE_THROWS_AS(threshold_sensitivity(sys, unsplit, ens, grid), ValidationError);
}

TEST_CASE("pipeline produces a resumable artifact directory") {
  auto sys = small_system();
  auto dir = fresh_dir("pipeline");
  auto sys_path = (fs::temp_directory_path() / "uclab-harness-system.json").string();
  save_system(sys, sys_path);

  ExperimentConfig cfg;
  cfg.system_path = sys_path;
  cfg.out_dir = dir;
  cfg.target_count = 6;
  cfg.seed = 7;
  cfg.sensitivity_grid = {0.3, 0.7};
  auto result = run_pipeline(cfg);

  for (const char* name : {"system.json", "samples.jsonl", "manifest.json", "model.json",
                           "outcomes.csv", "sensitivity.csv", "summary.json"})
    REQUIRE(fs::exists(fs::path(dir) / name));

  REQUIRE(static_cast<int>(result.dataset.samples.size()) == cfg.target_count);
  REQUIRE(result.training.n_train + result.training.n_test == cfg.target_count);
  REQUIRE(result.training.train_accuracy >= 0.0);
  REQUIRE(result.training.train_accuracy <= 1.0);

  // Outcomes on disk are the outcomes in memory, and the summary can be
  // recomputed from them alone.
  auto back = read_outcomes_csv((fs::path(dir) / "outcomes.csv").string());
  REQUIRE(back.size() == result.outcomes.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].sample_id == result.outcomes[i].sample_id);
    REQUIRE(back[i].objective == result.outcomes[i].objective);
    REQUIRE(back[i].sq == result.outcomes[i].sq);
  }
  REQUIRE(summary_to_json(back, result.training).dump() ==
          summary_to_json(result.outcomes, result.training).dump());
  auto summary = nlohmann::json::parse(slurp((fs::path(dir) / "summary.json").string()));
  REQUIRE(summary["procedures"]["b1"]["rows"].get<int>() == result.training.n_test);
  REQUIRE(summary["training"]["n_train"].get<int>() == result.training.n_train);

  // Resume keeps the expensive artifacts byte for byte.
  auto samples_before = slurp((fs::path(dir) / "samples.jsonl").string());
  auto model_before = slurp((fs::path(dir) / "model.json").string());
  auto cfg_resume = cfg;
  cfg_resume.resume = true;
  auto again = run_pipeline(cfg_resume);
  REQUIRE(slurp((fs::path(dir) / "samples.jsonl").string()) == samples_before);
  REQUIRE(slurp((fs::path(dir) / "model.json").string()) == model_before);
  REQUIRE(again.outcomes.size() == result.outcomes.size());

  // A fresh run in a second directory reproduces everything but timings.
  auto cfg_b = cfg;
  cfg_b.out_dir = fresh_dir("pipeline-b");
  auto other = run_pipeline(cfg_b);
  REQUIRE(slurp((fs::path(cfg_b.out_dir) / "model.json").string()) == model_before);
  REQUIRE(other.outcomes.size() == result.outcomes.size());
  for (std::size_t i = 0; i < other.outcomes.size(); ++i) {
    REQUIRE(other.outcomes[i].sample_id == result.outcomes[i].sample_id);
    REQUIRE(other.outcomes[i].status == result.outcomes[i].status);
    REQUIRE(other.outcomes[i].objective == result.outcomes[i].objective);
  }

  ExperimentConfig broken = cfg;
  broken.system_path = "/nonexistent/system.json";
  try {
    run_pipeline(broken);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    REQUIRE(e.stage_name == "load-system");
  }

  fs::remove_all(dir);
  fs::remove_all(cfg_b.out_dir);
  std::remove(sys_path.c_str());
}
