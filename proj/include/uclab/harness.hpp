// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uclab/datagen.hpp"
#include "uclab/logreg.hpp"
#include "uclab/reduction.hpp"

namespace uclab {

/// 100 * value / reference, undefined when the reference is not positive.
inline std::optional<double> normalized_percent(double value, double reference) {
  if (!(reference > 0.0)) return std::nullopt;
  return 100.0 * value / reference;
}

inline std::optional<double> normalized_sq(double obj_proc, double obj_b1) {
  return normalized_percent(obj_proc, obj_b1);
}

inline std::optional<double> normalized_st(double time_proc, double time_b1) {
  return normalized_percent(time_proc, time_b1);
}

// ---------------------------------------------------------------------------
// Benchmark over the test split: one outcome row per sample x procedure.
// Normalized columns are present only when the row and its B1 row are both
// optimal-within-gap, so aggregates follow from the rows alone.
// ---------------------------------------------------------------------------
struct OutcomeRow {
  int sample_id = 0;
  ProcedureId procedure = ProcedureId::B1;
  MipStatus status = MipStatus::Infeasible;
  bool has_objective = false;
  double objective = 0.0;
  double wall_time = 0.0;
  long long nodes_explored = 0;
  int n_fixed_u = 0;
  int n_fixed_v = 0;
  int n_binary_vars = 0;
  int n_constraints = 0;
  std::optional<double> sq;
  std::optional<double> st;
};

struct BenchmarkOptions {
  std::vector<ProcedureId> procedures = {ProcedureId::B1, ProcedureId::B2, ProcedureId::P1,
                                         ProcedureId::P2};
  MipOptions mip;
};

inline OutcomeRow outcome_to_row(int sample_id, const ReductionOutcome& out) {
  OutcomeRow row;
  row.sample_id = sample_id;
  row.procedure = out.procedure;
  row.status = out.status;
  row.has_objective = out.has_objective;
  row.objective = out.objective;
  row.wall_time = out.wall_time;
  row.nodes_explored = out.nodes_explored;
  row.n_fixed_u = out.n_fixed_u;
  row.n_fixed_v = out.n_fixed_v;
  row.n_binary_vars = out.stats.n_binary_vars;
  row.n_constraints = out.stats.n_constraints;
  return row;
}

/// Runs the selected procedures on every test-split sample. B1 always runs;
/// it is the normalization reference for everything else.
inline std::vector<OutcomeRow> run_benchmark(const GridSystem& system, const Dataset& ds,
                                             const LrEnsemble& ens,
                                             const BenchmarkOptions& opt = {}) {
  if (!ds.has_split) throw ValidationError("dataset has no train/test split");
  if (ens.system_hash != ds.system_hash)
    throw ValidationError("model and dataset come from different systems");
  if (ds.system_hash != system_hash(system))
    throw ValidationError("dataset does not match the given system");

  std::vector<ProcedureId> procs = opt.procedures;
  if (std::find(procs.begin(), procs.end(), ProcedureId::B1) == procs.end())
    procs.insert(procs.begin(), ProcedureId::B1);

  const auto& ids = ds.split.test_ids;
  std::vector<std::vector<OutcomeRow>> per_sample(ids.size());
  parallel_for(static_cast<int>(ids.size()), worker_count(), [&](int k) {
    const Sample& s = ds.by_id(ids[static_cast<std::size_t>(k)]);
    auto pred = predict(ens, s.demand);
    std::map<ProcedureId, ReductionOutcome> outs;
    for (auto p : procs) outs[p] = run_procedure(p, system, s.demand, pred, opt.mip);
    const auto& b1 = outs.at(ProcedureId::B1);
    for (auto p : procs) {
      auto row = outcome_to_row(s.sample_id, outs.at(p));
      if (p == ProcedureId::B1) {
        if (b1.status == MipStatus::OptimalWithinGap) {
          row.sq = 100.0;
          row.st = 100.0;
        }
      } else if (b1.status == MipStatus::OptimalWithinGap &&
                 outs.at(p).status == MipStatus::OptimalWithinGap) {
        row.sq = normalized_sq(outs.at(p).objective, b1.objective);
        row.st = normalized_st(outs.at(p).wall_time, b1.wall_time);
      }
      per_sample[static_cast<std::size_t>(k)].push_back(row);
    }
  });

  std::vector<OutcomeRow> rows;
  for (auto& group : per_sample)
    for (auto& row : group) rows.push_back(std::move(row));
  return rows;
}

// ---------------------------------------------------------------------------
// CSV round trip for outcome rows.
// ---------------------------------------------------------------------------
inline const char* kOutcomesHeader =
    "sample_id,procedure,status,objective,wall_time,nodes_explored,n_fixed_u,n_fixed_v,"
    "n_binary_vars,n_constraints,normalized_sq,normalized_st";

inline MipStatus mip_status_from_string(const std::string& s) {
  if (s == "optimal-within-gap") return MipStatus::OptimalWithinGap;
  if (s == "infeasible") return MipStatus::Infeasible;
  if (s == "limit-reached") return MipStatus::LimitReached;
  throw ParseError("unknown status '" + s + "'");
}

inline void write_outcomes_csv(const std::vector<OutcomeRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << kOutcomesHeader << "\n";
  for (const auto& r : rows) {
    out << r.sample_id << "," << to_string(r.procedure) << "," << to_string(r.status) << ",";
    if (r.has_objective) out << format_double(r.objective);
    out << "," << format_double(r.wall_time) << "," << r.nodes_explored << "," << r.n_fixed_u
        << "," << r.n_fixed_v << "," << r.n_binary_vars << "," << r.n_constraints << ",";
    if (r.sq) out << format_double(*r.sq);
    out << ",";
    if (r.st) out << format_double(*r.st);
    out << "\n";
  }
}

inline std::vector<OutcomeRow> read_outcomes_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kOutcomesHeader)
    throw ParseError("unexpected outcomes header in " + path);
  std::vector<OutcomeRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 12) cells.emplace_back();  // trailing empties
    if (cells.size() != 12) throw ParseError("bad outcomes row: " + line);
    try {
      OutcomeRow r;
      r.sample_id = std::stoi(cells[0]);
      r.procedure = procedure_from_string(cells[1]);
      r.status = mip_status_from_string(cells[2]);
      r.has_objective = !cells[3].empty();
      if (r.has_objective) r.objective = std::stod(cells[3]);
      r.wall_time = std::stod(cells[4]);
      r.nodes_explored = std::stoll(cells[5]);
      r.n_fixed_u = std::stoi(cells[6]);
      r.n_fixed_v = std::stoi(cells[7]);
      r.n_binary_vars = std::stoi(cells[8]);
      r.n_constraints = std::stoi(cells[9]);
      if (!cells[10].empty()) r.sq = std::stod(cells[10]);
      if (!cells[11].empty()) r.st = std::stod(cells[11]);
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError("bad outcomes row '" + line + "': " + e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregates: means over rows whose normalized columns exist (both the row
// and its B1 row optimal), infeasible/limit counts over all rows.
// ---------------------------------------------------------------------------
struct ProcedureAggregate {
  int n_rows = 0;
  int n_infeasible = 0;
  int n_limit = 0;
  int n_aggregated = 0;  // rows entering the means
  double mean_sq = 0.0;
  double mean_st = 0.0;
  double mean_nodes = 0.0;
  double mean_binary_vars = 0.0;
  double mean_fixed_u = 0.0;
  double mean_fixed_v = 0.0;
};

inline std::map<ProcedureId, ProcedureAggregate> aggregate_outcomes(
    const std::vector<OutcomeRow>& rows) {
  std::map<ProcedureId, ProcedureAggregate> agg;
  for (const auto& r : rows) {
    auto& a = agg[r.procedure];
    ++a.n_rows;
    if (r.status == MipStatus::Infeasible) ++a.n_infeasible;
    if (r.status == MipStatus::LimitReached) ++a.n_limit;
    if (r.sq && r.st) {
      ++a.n_aggregated;
      a.mean_sq += *r.sq;
      a.mean_st += *r.st;
      a.mean_nodes += static_cast<double>(r.nodes_explored);
      a.mean_binary_vars += r.n_binary_vars;
      a.mean_fixed_u += r.n_fixed_u;
      a.mean_fixed_v += r.n_fixed_v;
    }
  }
  for (auto& [proc, a] : agg) {
    if (a.n_aggregated == 0) continue;
    double n = a.n_aggregated;
    a.mean_sq /= n;
    a.mean_st /= n;
    a.mean_nodes /= n;
    a.mean_binary_vars /= n;
    a.mean_fixed_u /= n;
    a.mean_fixed_v /= n;
  }
  return agg;
}

// ---------------------------------------------------------------------------
// Threshold sensitivity: reclassify the test split at each grid value, then
// rerun B2 (always) plus any requested subset of P1/P2.
// ---------------------------------------------------------------------------
struct SensitivityRow {
  double threshold = 0.0;
  ProcedureId procedure = ProcedureId::B2;
  int n_infeasible = 0;
  int n_feasible = 0;
  std::optional<double> mean_sq;
  std::optional<double> mean_st;
};

inline std::vector<SensitivityRow> threshold_sensitivity(
    const GridSystem& system, const Dataset& ds, const LrEnsemble& ens,
    const std::vector<double>& grid,
    const std::vector<ProcedureId>& extra_procedures = {}, const MipOptions& mip = {},
    const std::vector<OutcomeRow>* b1_rows = nullptr) {
  if (!ds.has_split) throw ValidationError("dataset has no train/test split");
  if (grid.empty()) throw ValidationError("sensitivity grid is empty");
  for (double g : grid)
    if (g < 0.0 || g > 1.0) throw ValidationError("thresholds must lie in [0,1]");

  std::vector<ProcedureId> procs = {ProcedureId::B2};
  for (auto p : extra_procedures)
    if (p == ProcedureId::P1 || p == ProcedureId::P2) procs.push_back(p);

  const auto& ids = ds.split.test_ids;

  // B1 references are threshold-independent; reuse benchmark rows when given.
  std::map<int, std::pair<double, double>> b1_ref;  // id -> (objective, time)
  if (b1_rows) {
    for (const auto& r : *b1_rows)
      if (r.procedure == ProcedureId::B1 && r.status == MipStatus::OptimalWithinGap)
        b1_ref[r.sample_id] = {r.objective, r.wall_time};
  } else {
    std::vector<std::optional<std::pair<double, double>>> ref(ids.size());
    parallel_for(static_cast<int>(ids.size()), worker_count(), [&](int k) {
      const Sample& s = ds.by_id(ids[static_cast<std::size_t>(k)]);
      auto out = run_b1(system, s.demand, mip);
      if (out.status == MipStatus::OptimalWithinGap)
        ref[static_cast<std::size_t>(k)] = {out.objective, out.wall_time};
    });
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (ref[k]) b1_ref[ids[k]] = *ref[k];
  }

  std::vector<SensitivityRow> table;
  for (double theta : grid) {
    LrEnsemble probe = ens;
    probe.threshold = theta;
    struct Cell {
      int infeasible = 0, feasible = 0;
      double sq_sum = 0.0, st_sum = 0.0;
      int norm_n = 0;
    };
    std::map<ProcedureId, Cell> cells;
    std::vector<std::map<ProcedureId, ReductionOutcome>> outs(ids.size());
    parallel_for(static_cast<int>(ids.size()), worker_count(), [&](int k) {
      const Sample& s = ds.by_id(ids[static_cast<std::size_t>(k)]);
      auto pred = predict(probe, s.demand);
      for (auto p : procs)
        outs[static_cast<std::size_t>(k)][p] = run_procedure(p, system, s.demand, pred, mip);
    });
    for (std::size_t k = 0; k < ids.size(); ++k) {
      int id = ids[k];
      for (auto p : procs) {
        const auto& out = outs[k].at(p);
        auto& cell = cells[p];
        if (out.status == MipStatus::OptimalWithinGap) {
          ++cell.feasible;
          auto it = b1_ref.find(id);
          if (it != b1_ref.end()) {
            auto sq = normalized_sq(out.objective, it->second.first);
            auto st = normalized_st(out.wall_time, it->second.second);
            if (sq && st) {
              cell.sq_sum += *sq;
              cell.st_sum += *st;
              ++cell.norm_n;
            }
          }
        } else {
          ++cell.infeasible;
        }
      }
    }
    for (auto p : procs) {
      const auto& cell = cells[p];
      SensitivityRow row;
      row.threshold = theta;
      row.procedure = p;
      row.n_infeasible = cell.infeasible;
      row.n_feasible = cell.feasible;
      if (cell.norm_n > 0) {
        row.mean_sq = cell.sq_sum / cell.norm_n;
        row.mean_st = cell.st_sum / cell.norm_n;
      }
      table.push_back(row);
    }
  }
  return table;
}

inline const char* kSensitivityHeader =
    "threshold,procedure,n_infeasible,n_feasible,mean_sq,mean_st";

inline void write_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << kSensitivityHeader << "\n";
  for (const auto& r : rows) {
    out << format_double(r.threshold) << "," << to_string(r.procedure) << "," << r.n_infeasible
        << "," << r.n_feasible << ",";
    if (r.mean_sq) out << format_double(*r.mean_sq);
    out << ",";
    if (r.mean_st) out << format_double(*r.mean_st);
    out << "\n";
  }
}

inline std::vector<SensitivityRow> read_sensitivity_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kSensitivityHeader)
    throw ParseError("unexpected sensitivity header in " + path);
  std::vector<SensitivityRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 6) cells.emplace_back();
    if (cells.size() != 6) throw ParseError("bad sensitivity row: " + line);
    try {
      SensitivityRow r;
      r.threshold = std::stod(cells[0]);
      r.procedure = procedure_from_string(cells[1]);
      r.n_infeasible = std::stoi(cells[2]);
      r.n_feasible = std::stoi(cells[3]);
      if (!cells[4].empty()) r.mean_sq = std::stod(cells[4]);
      if (!cells[5].empty()) r.mean_st = std::stod(cells[5]);
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError("bad sensitivity row '" + line + "': " + e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Summary JSON: aggregates plus the training block, regenerable from the
// CSV artifacts.
// ---------------------------------------------------------------------------
struct TrainingSummary {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double threshold = 0.0;
  double train_seconds = 0.0;
  int n_train = 0;
  int n_test = 0;
};

inline TrainingSummary training_summary(const Dataset& ds, const LrEnsemble& ens) {
  if (!ds.has_split) throw ValidationError("dataset has no train/test split");
  TrainingSummary ts;
  ts.threshold = ens.threshold;
  ts.train_seconds = ens.train_seconds;
  ts.n_train = static_cast<int>(ds.split.train_ids.size());
  ts.n_test = static_cast<int>(ds.split.test_ids.size());
  auto score = [&](const std::vector<int>& ids) {
    std::vector<std::vector<std::vector<int>>> pred, truth;
    for (int id : ids) {
      pred.push_back(predict(ens, ds.by_id(id).demand).classified);
      truth.push_back(ds.by_id(id).commitment);
    }
    return accuracy(pred, truth);
  };
  ts.train_accuracy = score(ds.split.train_ids);
  ts.test_accuracy = score(ds.split.test_ids);
  return ts;
}

inline nlohmann::json summary_to_json(const std::vector<OutcomeRow>& rows,
                                      const TrainingSummary& ts) {
  auto agg = aggregate_outcomes(rows);
  nlohmann::json procedures;
  for (const auto& [proc, a] : agg) {
    nlohmann::json pj{{"rows", a.n_rows},
                      {"infeasible", a.n_infeasible},
                      {"limit_reached", a.n_limit},
                      {"aggregated", a.n_aggregated}};
    if (a.n_aggregated > 0) {
      pj["mean_sq"] = a.mean_sq;
      pj["mean_st"] = a.mean_st;
      pj["mean_nodes"] = a.mean_nodes;
      pj["mean_binary_vars"] = a.mean_binary_vars;
      pj["mean_fixed_u"] = a.mean_fixed_u;
      pj["mean_fixed_v"] = a.mean_fixed_v;
    }
    procedures[to_string(proc)] = std::move(pj);
  }
  return nlohmann::json{{"procedures", procedures},
                        {"training",
                         {{"train_accuracy", ts.train_accuracy},
                          {"test_accuracy", ts.test_accuracy},
                          {"threshold", ts.threshold},
                          {"train_seconds", ts.train_seconds},
                          {"n_train", ts.n_train},
                          {"n_test", ts.n_test}}}};
}

// ---------------------------------------------------------------------------
// End-to-end pipeline. Every stage persists its artifacts on completion, so
// a failure leaves a resumable directory behind; errors carry the stage name.
// ---------------------------------------------------------------------------
struct ExperimentConfig {
  std::string system_path;
  std::string out_dir;
  int target_count = 60;
  std::uint64_t seed = 0;  // drives noise master seed and the split shuffle
  double train_fraction = 0.8;
  NoiseParams noise;  // master_seed is overwritten with `seed`
  LrConfig lr;
  std::vector<double> threshold_grid = default_threshold_grid();
  std::vector<double> sensitivity_grid = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<ProcedureId> procedures = {ProcedureId::B1, ProcedureId::B2, ProcedureId::P1,
                                         ProcedureId::P2};
  std::vector<ProcedureId> sensitivity_extra;  // P1/P2 on top of the always-on B2
  MipOptions mip;
  bool resume = false;  // reuse artifacts already present in out_dir
};

struct PipelineResult {
  Dataset dataset;
  LrEnsemble ensemble;
  std::vector<OutcomeRow> outcomes;
  std::vector<SensitivityRow> sensitivity;
  TrainingSummary training;
};

inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  GridSystem system = stage("load-system", [&] { return load_system(cfg.system_path); });
  fs::create_directories(cfg.out_dir);
  auto path = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

  NoiseParams noise = cfg.noise;
  noise.master_seed = cfg.seed;

  Dataset ds = stage("generate", [&] {
    if (cfg.resume && fs::exists(path("samples.jsonl")) && fs::exists(path("manifest.json"))) {
      auto existing = load_dataset(path("samples.jsonl"), path("manifest.json"));
      if (existing.system_hash == system_hash(system) &&
          static_cast<int>(existing.samples.size()) == cfg.target_count)
        return existing;
    }
    auto fresh = generate_dataset(system, cfg.target_count, noise, cfg.mip);
    save_system(system, path("system.json"));
    save_dataset(fresh, path("samples.jsonl"), path("manifest.json"));
    return fresh;
  });

  ds = stage("split", [&] {
    if (ds.has_split) return ds;
    auto split = shuffle_split(std::move(ds), cfg.train_fraction, cfg.seed);
    save_manifest(split, path("manifest.json"));
    return split;
  });

  LrEnsemble ens = stage("train", [&] {
    if (cfg.resume && fs::exists(path("model.json"))) {
      auto existing = load_model(path("model.json"));
      if (existing.system_hash == ds.system_hash) return existing;
    }
    auto trained = train_ensemble(ds, cfg.lr);
    save_model(trained, path("model.json"));
    return trained;
  });

  stage("tune", [&] {
    ens.threshold = tune_threshold(ens, ds, cfg.threshold_grid);
    save_model(ens, path("model.json"));
    return 0;
  });

  std::vector<OutcomeRow> outcomes = stage("benchmark", [&] {
    BenchmarkOptions bopt;
    bopt.procedures = cfg.procedures;
    bopt.mip = cfg.mip;
    auto rows = run_benchmark(system, ds, ens, bopt);
    write_outcomes_csv(rows, path("outcomes.csv"));
    return rows;
  });

  std::vector<SensitivityRow> sens = stage("sensitivity", [&] {
    auto table = threshold_sensitivity(system, ds, ens, cfg.sensitivity_grid,
                                       cfg.sensitivity_extra, cfg.mip, &outcomes);
    write_sensitivity_csv(table, path("sensitivity.csv"));
    return table;
  });

  TrainingSummary ts = stage("report", [&] {
    auto summary = training_summary(ds, ens);
    std::ofstream out(path("summary.json"), std::ios::binary);
    if (!out) throw ParseError("cannot open summary.json for writing");
    out << summary_to_json(outcomes, summary).dump(2) << "\n";
    return summary;
  });

  return {std::move(ds), std::move(ens), std::move(outcomes), std::move(sens), ts};
}

}  // namespace uclab
