// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Subcommands mirror the pipeline stages; artifacts
// live in a dataset directory (samples.jsonl, manifest.json, system.json,
// model.json, outcomes.csv, sensitivity.csv, summary.json).
//
// Exit codes: 0 success, 2 bad input, 3 a stage failed at runtime.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uclab/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

uclab::Dataset load_dataset_dir(const std::string& dir) {
  return uclab::load_dataset(join(dir, "samples.jsonl"), join(dir, "manifest.json"));
}

uclab::GridSystem load_system_dir(const std::string& dir) {
  auto path = join(dir, "system.json");
  if (!fs::exists(path))
    throw uclab::ValidationError("dataset directory has no system.json; run generate first");
  return uclab::load_system(path);
}

// "LO:HI:STEP" inclusive of both ends, or a single value.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  try {
    if (parts.size() == 1) return {std::stod(parts[0])};
    if (parts.size() == 3) {
      double lo = std::stod(parts[0]);
      double hi = std::stod(parts[1]);
      double step = std::stod(parts[2]);
      if (step <= 0.0) throw uclab::ValidationError("grid step must be positive");
      if (hi < lo) throw uclab::ValidationError("grid upper end below lower end");
      int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
      std::vector<double> grid;
      for (int i = 0; i < n; ++i) grid.push_back(lo + i * step);
      return grid;
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  throw uclab::ValidationError("grid must be a value or LO:HI:STEP, got '" + text + "'");
}

std::vector<uclab::ProcedureId> parse_procedures(const std::string& text) {
  std::vector<uclab::ProcedureId> procs;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) procs.push_back(uclab::procedure_from_string(cur));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',') {
      flush();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  flush();
  if (procs.empty()) throw uclab::ValidationError("empty procedure list");
  return procs;
}

uclab::LrConfig load_lr_config(const std::string& path) {
  uclab::LrConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw uclab::ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw uclab::ParseError(std::string("bad training config: ") + e.what());
  }
  if (j.contains("penalty")) cfg.penalty = j.at("penalty").get<double>();
  if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
  if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void print_summary(const std::vector<uclab::OutcomeRow>& rows,
                   const uclab::TrainingSummary* ts) {
  auto agg = uclab::aggregate_outcomes(rows);
  std::printf("%-4s %6s %10s %8s %10s %10s %10s\n", "proc", "rows", "infeasible", "limit",
              "mean_sq", "mean_st", "mean_nodes");
  for (const auto& [proc, a] : agg) {
    std::printf("%-4s %6d %10d %8d", uclab::to_string(proc), a.n_rows, a.n_infeasible,
                a.n_limit);
    if (a.n_aggregated > 0)
      std::printf(" %10.3f %10.3f %10.1f\n", a.mean_sq, a.mean_st, a.mean_nodes);
    else
      std::printf(" %10s %10s %10s\n", "-", "-", "-");
  }
  if (ts != nullptr)
    std::printf("training: accuracy %.4f train / %.4f test, threshold %.2f, %d/%d split\n",
                ts->train_accuracy, ts->test_accuracy, ts->threshold, ts->n_train, ts->n_test);
}

// Gnuplot-ready whitespace tables; "?" marks a missing cell
// (`set datafile missing "?"`).
void write_plot_files(const std::string& in_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto rows = uclab::read_outcomes_csv(join(in_dir, "outcomes.csv"));
  auto agg = uclab::aggregate_outcomes(rows);
  {
    std::ofstream out(join(out_dir, "procedure_means.dat"), std::ios::binary);
    out << "# procedure mean_sq mean_st mean_nodes mean_binary_vars\n";
    for (const auto& [proc, a] : agg) {
      out << uclab::to_string(proc);
      if (a.n_aggregated > 0)
        out << " " << uclab::format_double(a.mean_sq) << " " << uclab::format_double(a.mean_st)
            << " " << uclab::format_double(a.mean_nodes) << " "
            << uclab::format_double(a.mean_binary_vars) << "\n";
      else
        out << " ? ? ? ?\n";
    }
  }

  auto sens_path = join(in_dir, "sensitivity.csv");
  if (!fs::exists(sens_path)) return;
  auto sens = uclab::read_sensitivity_csv(sens_path);
  std::vector<double> thresholds;
  std::vector<uclab::ProcedureId> procs;
  for (const auto& r : sens) {
    if (thresholds.empty() || thresholds.back() != r.threshold)
      if (std::find(thresholds.begin(), thresholds.end(), r.threshold) == thresholds.end())
        thresholds.push_back(r.threshold);
    if (std::find(procs.begin(), procs.end(), r.procedure) == procs.end())
      procs.push_back(r.procedure);
  }
  auto cell = [&](double th, uclab::ProcedureId p) -> const uclab::SensitivityRow* {
    for (const auto& r : sens)
      if (r.threshold == th && r.procedure == p) return &r;
    return nullptr;
  };
  auto table = [&](const char* file, const char* what, auto&& value) {
    std::ofstream out(join(out_dir, file), std::ios::binary);
    out << "# threshold";
    for (auto p : procs) out << " " << uclab::to_string(p) << "_" << what;
    out << "\n";
    for (double th : thresholds) {
      out << uclab::format_double(th);
      for (auto p : procs) {
        const auto* r = cell(th, p);
        std::optional<std::string> v = r ? value(*r) : std::nullopt;
        out << " " << (v ? *v : "?");
      }
      out << "\n";
    }
  };
  table("infeasible_vs_threshold.dat", "infeasible",
        [](const uclab::SensitivityRow& r) -> std::optional<std::string> {
          return std::to_string(r.n_infeasible);
        });
  table("quality_vs_threshold.dat", "sq",
        [](const uclab::SensitivityRow& r) -> std::optional<std::string> {
          if (!r.mean_sq) return std::nullopt;
          return uclab::format_double(*r.mean_sq);
        });
  table("time_vs_threshold.dat", "st",
        [](const uclab::SensitivityRow& r) -> std::optional<std::string> {
          if (!r.mean_st) return std::nullopt;
          return uclab::format_double(*r.mean_st);
        });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unit-commitment reduction laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "uclab 1.0.0");

  // generate
  std::string g_system, g_out;
  int g_count = 60;
  std::uint64_t g_seed = 0;
  double g_gsigma = -1.0, g_nsigma = -1.0, g_gap = 0.01;
  auto* gen = app.add_subcommand("generate", "sample noisy demand profiles and solve them");
  gen->add_option("--system", g_system, "grid system JSON")->required();
  gen->add_option("--count", g_count, "feasible samples to produce")->required();
  gen->add_option("--seed", g_seed, "master noise seed")->required();
  gen->add_option("--out", g_out, "dataset directory to create")->required();
  gen->add_option("--global-sigma", g_gsigma, "system-wide noise sigma");
  gen->add_option("--nodal-sigma", g_nsigma, "per-bus noise sigma");
  gen->add_option("--gap", g_gap, "relative optimality gap for labelling");
  gen->callback([&] {
    auto system = uclab::load_system(g_system);
    uclab::NoiseParams np;
    np.master_seed = g_seed;
    if (g_gsigma >= 0.0) np.global_sigma = g_gsigma;
    if (g_nsigma >= 0.0) np.nodal_sigma = g_nsigma;
    uclab::MipOptions mip;
    mip.relative_gap = g_gap;
    auto ds = uclab::generate_dataset(system, g_count, np, mip);
    fs::create_directories(g_out);
    uclab::save_system(system, join(g_out, "system.json"));
    uclab::save_dataset(ds, join(g_out, "samples.jsonl"), join(g_out, "manifest.json"));
    std::printf("generated %d samples in %s\n", static_cast<int>(ds.samples.size()),
                g_out.c_str());
  });

  // split
  std::string s_dataset;
  std::uint64_t s_seed = 0;
  double s_fraction = 0.8;
  auto* spl = app.add_subcommand("split", "shuffle the dataset into train and test ids");
  spl->add_option("--dataset", s_dataset, "dataset directory")->required();
  spl->add_option("--seed", s_seed, "shuffle seed")->required();
  spl->add_option("--train-fraction", s_fraction, "share of samples used for training");
  spl->callback([&] {
    auto ds = load_dataset_dir(s_dataset);
    ds = uclab::shuffle_split(std::move(ds), s_fraction, s_seed);
    uclab::save_manifest(ds, join(s_dataset, "manifest.json"));
    std::printf("split %zu samples into %zu train / %zu test\n", ds.samples.size(),
                ds.split.train_ids.size(), ds.split.test_ids.size());
  });

  // train
  std::string t_dataset, t_config, t_out;
  auto* trn = app.add_subcommand("train", "fit the per-target classifiers");
  trn->add_option("--dataset", t_dataset, "dataset directory with a split")->required();
  trn->add_option("--config", t_config, "training config JSON (penalty, tol, max_iter, seed)");
  trn->add_option("--out", t_out, "model file (default dataset/model.json)");
  trn->callback([&] {
    auto ds = load_dataset_dir(t_dataset);
    auto ens = uclab::train_ensemble(ds, load_lr_config(t_config));
    auto path = t_out.empty() ? join(t_dataset, "model.json") : t_out;
    uclab::save_model(ens, path);
    auto ts = uclab::training_summary(ds, ens);
    std::printf("trained %d targets in %.2fs, accuracy %.4f train / %.4f test, saved %s\n",
                ens.n_generators * ens.n_periods, ens.train_seconds,
                ts.train_accuracy, ts.test_accuracy, path.c_str());
  });

  // tune
  std::string u_model, u_dataset, u_grid = "0.2:0.8:0.05";
  auto* tun = app.add_subcommand("tune", "pick the classification threshold on the train split");
  tun->add_option("--model", u_model, "model file, updated in place")->required();
  tun->add_option("--dataset", u_dataset, "dataset directory")->required();
  tun->add_option("--grid", u_grid, "candidate thresholds LO:HI:STEP");
  tun->callback([&] {
    auto ens = uclab::load_model(u_model);
    auto ds = load_dataset_dir(u_dataset);
    ens.threshold = uclab::tune_threshold(ens, ds, parse_grid(u_grid));
    uclab::save_model(ens, u_model);
    std::printf("threshold %.4f saved to %s\n", ens.threshold, u_model.c_str());
  });

  // benchmark
  std::string b_model, b_dataset, b_procs = "b1,b2,p1,p2", b_out;
  double b_gap = 0.01;
  auto* ben = app.add_subcommand("benchmark", "run the procedures over the test split");
  ben->add_option("--model", b_model, "model file")->required();
  ben->add_option("--dataset", b_dataset, "dataset directory")->required();
  ben->add_option("--procedures", b_procs, "comma list of b1,b2,p1,p2");
  ben->add_option("--gap", b_gap, "relative optimality gap");
  ben->add_option("--out", b_out, "output directory (default dataset)");
  ben->callback([&] {
    auto system = load_system_dir(b_dataset);
    auto ds = load_dataset_dir(b_dataset);
    auto ens = uclab::load_model(b_model);
    uclab::BenchmarkOptions opt;
    opt.procedures = parse_procedures(b_procs);
    opt.mip.relative_gap = b_gap;
    auto rows = uclab::run_benchmark(system, ds, ens, opt);
    auto out_dir = b_out.empty() ? b_dataset : b_out;
    fs::create_directories(out_dir);
    uclab::write_outcomes_csv(rows, join(out_dir, "outcomes.csv"));
    auto ts = uclab::training_summary(ds, ens);
    std::ofstream sj(join(out_dir, "summary.json"), std::ios::binary);
    sj << uclab::summary_to_json(rows, ts).dump(2) << "\n";
    print_summary(rows, &ts);
  });

  // sensitivity
  std::string y_model, y_dataset, y_grid = "0.2:0.9:0.1", y_procs, y_out;
  double y_gap = 0.01;
  auto* sen = app.add_subcommand("sensitivity", "sweep the threshold over the test split");
  sen->add_option("--model", y_model, "model file")->required();
  sen->add_option("--dataset", y_dataset, "dataset directory")->required();
  sen->add_option("--grid", y_grid, "thresholds LO:HI:STEP");
  sen->add_option("--procedures", y_procs, "extra procedures beside b2 (p1,p2)");
  sen->add_option("--gap", y_gap, "relative optimality gap");
  sen->add_option("--out", y_out, "output directory (default dataset)");
  sen->callback([&] {
    auto system = load_system_dir(y_dataset);
    auto ds = load_dataset_dir(y_dataset);
    auto ens = uclab::load_model(y_model);
    std::vector<uclab::ProcedureId> extra;
    if (!y_procs.empty()) extra = parse_procedures(y_procs);
    uclab::MipOptions mip;
    mip.relative_gap = y_gap;
    auto out_dir = y_out.empty() ? y_dataset : y_out;
    std::vector<uclab::OutcomeRow> b1_rows;
    const std::vector<uclab::OutcomeRow>* refs = nullptr;
    if (fs::exists(join(out_dir, "outcomes.csv"))) {
      b1_rows = uclab::read_outcomes_csv(join(out_dir, "outcomes.csv"));
      refs = &b1_rows;
    }
    auto table =
        uclab::threshold_sensitivity(system, ds, ens, parse_grid(y_grid), extra, mip, refs);
    fs::create_directories(out_dir);
    uclab::write_sensitivity_csv(table, join(out_dir, "sensitivity.csv"));
    for (const auto& r : table) {
      std::printf("threshold %.2f %-4s infeasible %d feasible %d", r.threshold,
                  uclab::to_string(r.procedure), r.n_infeasible, r.n_feasible);
      if (r.mean_sq) std::printf(" mean_sq %.3f mean_st %.3f", *r.mean_sq, *r.mean_st);
      std::printf("\n");
    }
  });

  // report
  std::string r_in;
  auto* rep = app.add_subcommand("report", "summarize the artifacts in a directory");
  rep->add_option("--in", r_in, "directory with outcomes.csv")->required();
  rep->callback([&] {
    auto rows = uclab::read_outcomes_csv(join(r_in, "outcomes.csv"));
    bool have_model = fs::exists(join(r_in, "model.json")) &&
                      fs::exists(join(r_in, "samples.jsonl")) &&
                      fs::exists(join(r_in, "manifest.json"));
    if (have_model) {
      auto ds = load_dataset_dir(r_in);
      auto ens = uclab::load_model(join(r_in, "model.json"));
      auto ts = uclab::training_summary(ds, ens);
      std::ofstream sj(join(r_in, "summary.json"), std::ios::binary);
      sj << uclab::summary_to_json(rows, ts).dump(2) << "\n";
      print_summary(rows, &ts);
    } else {
      print_summary(rows, nullptr);
    }
    if (fs::exists(join(r_in, "sensitivity.csv"))) {
      auto sens = uclab::read_sensitivity_csv(join(r_in, "sensitivity.csv"));
      std::printf("sensitivity rows: %zu (see sensitivity.csv)\n", sens.size());
    }
  });

  // plot
  std::string p_in, p_out;
  auto* plt = app.add_subcommand("plot", "emit gnuplot-ready .dat files from the reports");
  plt->add_option("--in", p_in, "directory with outcomes.csv / sensitivity.csv")->required();
  plt->add_option("--out", p_out, "output directory (default --in)");
  plt->callback([&] {
    write_plot_files(p_in, p_out.empty() ? p_in : p_out);
    std::printf("plot data written to %s\n", (p_out.empty() ? p_in : p_out).c_str());
  });

  // pipeline
  uclab::ExperimentConfig pc;
  std::string pl_thresholds, pl_sgrid, pl_procs, pl_sprocs;
  double pl_gap = 0.01;
  auto* pip = app.add_subcommand("pipeline", "run every stage end to end");
  pip->add_option("--system", pc.system_path, "grid system JSON")->required();
  pip->add_option("--out", pc.out_dir, "artifact directory")->required();
  pip->add_option("--count", pc.target_count, "feasible samples to produce");
  pip->add_option("--seed", pc.seed, "seed for noise and the split shuffle");
  pip->add_option("--train-fraction", pc.train_fraction, "share of samples for training");
  pip->add_option("--global-sigma", pc.noise.global_sigma, "system-wide noise sigma");
  pip->add_option("--nodal-sigma", pc.noise.nodal_sigma, "per-bus noise sigma");
  pip->add_option("--gap", pl_gap, "relative optimality gap");
  pip->add_option("--thresholds", pl_thresholds, "tuning grid LO:HI:STEP");
  pip->add_option("--grid", pl_sgrid, "sensitivity grid LO:HI:STEP");
  pip->add_option("--procedures", pl_procs, "benchmark procedures");
  pip->add_option("--sensitivity-procedures", pl_sprocs, "extra sweep procedures");
  pip->add_flag("--resume", pc.resume, "reuse matching artifacts already in --out");
  pip->callback([&] {
    pc.mip.relative_gap = pl_gap;
    if (!pl_thresholds.empty()) pc.threshold_grid = parse_grid(pl_thresholds);
    if (!pl_sgrid.empty()) pc.sensitivity_grid = parse_grid(pl_sgrid);
    if (!pl_procs.empty()) pc.procedures = parse_procedures(pl_procs);
    if (!pl_sprocs.empty()) pc.sensitivity_extra = parse_procedures(pl_sprocs);
    auto result = uclab::run_pipeline(pc);
    std::printf("artifacts in %s\n", pc.out_dir.c_str());
    print_summary(result.outcomes, &result.training);
  });

  // dump
  std::string d_system, d_out;
  auto* dmp = app.add_subcommand("dump", "print the base-demand problem in LP text form");
  dmp->add_option("--system", d_system, "grid system JSON")->required();
  dmp->add_option("--out", d_out, "output file (default stdout)");
  dmp->callback([&] {
    auto system = uclab::load_system(d_system);
    auto pr = uclab::build_scuc(system, uclab::base_profile(system));
    auto st = uclab::problem_stats(pr);
    if (d_out.empty()) {
      uclab::dump_problem(pr, std::cout);
    } else {
      std::ofstream out(d_out, std::ios::binary);
      if (!out) throw uclab::ParseError("cannot open " + d_out + " for writing");
      uclab::dump_problem(pr, out);
      std::printf("%d columns (%d binary), %d constraints written to %s\n", st.n_linear_vars + st.n_binary_vars,
                  st.n_binary_vars, st.n_constraints, d_out.c_str());
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const uclab::StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const uclab::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const uclab::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const uclab::DimensionMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const uclab::ShapeMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const uclab::ConflictError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const uclab::TooFewSamples& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
