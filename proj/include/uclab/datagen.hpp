// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uclab/grid.hpp"
#include "uclab/mip.hpp"
#include "uclab/scuc.hpp"

namespace uclab {

struct NoiseParams {
  double global_sigma = 0.03;  // system-wide factor, one draw per period
  double nodal_sigma = 0.05;   // independent per bus and period
  std::uint64_t master_seed = 0;
};

struct Sample {
  int sample_id = 0;
  DemandProfile demand;
  std::vector<std::vector<int>> commitment;  // generator-major, period-minor
  double objective = 0.0;
  double solve_time = 0.0;
};

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::vector<int> train_ids;
  std::vector<int> test_ids;
};

struct Dataset {
  std::vector<Sample> samples;
  std::string system_hash;
  NoiseParams params;
  bool has_split = false;
  DatasetSplit split;

  const Sample& by_id(int sample_id) const {
    for (const auto& s : samples)
      if (s.sample_id == sample_id) return s;
    throw ValidationError("no sample with id " + std::to_string(sample_id));
  }
};

/// Multiplicative demand noise: one system-wide factor per period on top of
/// independent per-entry jitter, both centred on 1. The stream depends only
/// on (master_seed, sample_id), never on evaluation order.
inline DemandProfile perturb_profile(const DemandProfile& base, const NoiseParams& params,
                                     int sample_id) {
  if (params.global_sigma < 0 || params.nodal_sigma < 0)
    throw ValidationError("noise sigmas must be nonnegative");
  Rng rng(mix_seed(params.master_seed, static_cast<std::uint64_t>(sample_id)));
  std::size_t nb = base.values.size();
  std::size_t nt = nb ? base.values[0].size() : 0;
  std::vector<double> global(nt);
  for (double& g : global) g = 1.0 + params.global_sigma * rng.gaussian();
  DemandProfile out = base;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t t = 0; t < nt; ++t) {
      double nodal = 1.0 + params.nodal_sigma * rng.gaussian();
      out.values[b][t] = std::max(0.0, base.values[b][t] * global[t] * nodal);
    }
  return out;
}

/// Labels one perturbed profile. Commitment entries are the incumbent's
/// binaries rounded to exact 0/1; infeasible profiles report ok = false.
struct LabeledAttempt {
  bool ok = false;
  Sample sample;
};

inline LabeledAttempt label_attempt(const GridSystem& system, const DemandProfile& base,
                                    const NoiseParams& params, int sample_id,
                                    const MipOptions& options) {
  LabeledAttempt att;
  att.sample.sample_id = sample_id;
  att.sample.demand = perturb_profile(base, params, sample_id);
  auto pr = build_scuc(system, att.sample.demand);
  auto res = solve_mip(pr, options);
  if (res.status != MipStatus::OptimalWithinGap || !res.has_incumbent) return att;
  auto expanded = expand_solution(pr, res.incumbent.values);
  att.sample.commitment.assign(static_cast<std::size_t>(pr.n_generators),
                               std::vector<int>(static_cast<std::size_t>(pr.n_periods), 0));
  for (int g = 0; g < pr.n_generators; ++g)
    for (int t = 0; t < pr.n_periods; ++t)
      att.sample.commitment[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)] =
          static_cast<int>(std::lround(
              expanded.commit[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)]));
  att.sample.objective = res.incumbent.objective;
  att.sample.solve_time = res.wall_time;
  att.ok = true;
  return att;
}

/// Draws perturbations with consecutive sample ids starting at 0, keeps the
/// first target_count feasible ones, and gives up after 3x target attempts.
/// Infeasible draws consume their id; they are logged, never stored. Waves
/// are sized by outstanding need, so the attempted id range is identical no
/// matter how many workers run.
inline Dataset generate_dataset(const GridSystem& system, int target_count,
                                const NoiseParams& params, const MipOptions& options = {}) {
  if (target_count < 1) throw ValidationError("target_count must be at least 1");
  if (params.global_sigma < 0 || params.nodal_sigma < 0)
    throw ValidationError("noise sigmas must be nonnegative");
  validate_system(system);

  Dataset ds;
  ds.system_hash = system_hash(system);
  ds.params = params;
  DemandProfile base = base_profile(system);

  const int cap = 3 * target_count;
  int attempted = 0;
  while (static_cast<int>(ds.samples.size()) < target_count && attempted < cap) {
    int needed = target_count - static_cast<int>(ds.samples.size());
    int batch = std::min(cap - attempted, needed);
    std::vector<LabeledAttempt> wave(static_cast<std::size_t>(batch));
    int first = attempted;
    parallel_for(batch, worker_count(), [&](int k) {
      wave[static_cast<std::size_t>(k)] =
          label_attempt(system, base, params, first + k, options);
    });
    for (auto& att : wave) {
      if (att.ok) {
        ds.samples.push_back(std::move(att.sample));
      } else if (verbosity() >= 1) {
        std::clog << "sample " << att.sample.sample_id << ": infeasible profile, skipped\n";
      }
    }
    attempted += batch;
  }
  if (static_cast<int>(ds.samples.size()) < target_count)
    throw AttemptCapExceeded("attempt cap of " + std::to_string(cap) + " reached with " +
                                 std::to_string(ds.samples.size()) + " feasible samples",
                             static_cast<int>(ds.samples.size()));
  return ds;
}

/// Seeded shuffle, then an 80/20 cut by position. Ids inside each side keep
/// their shuffled order.
inline Dataset shuffle_split(Dataset dataset, double train_fraction, std::uint64_t seed) {
  std::size_t n = dataset.samples.size();
  if (n < 2) throw TooFewSamples("need at least 2 samples to split, have " + std::to_string(n));
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ValidationError("train fraction must lie strictly between 0 and 1");
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = dataset.samples[i].sample_id;
  Rng rng(seed);
  rng.shuffle(ids);
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  dataset.has_split = true;
  dataset.split.seed = seed;
  dataset.split.train_ids.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
  dataset.split.test_ids.assign(ids.begin() + static_cast<long>(n_train), ids.end());
  return dataset;
}

// ---------------------------------------------------------------------------
// Disk format: samples as JSON Lines, bookkeeping in a manifest JSON. Doubles
// serialize shortest round-trip, so identical values produce identical bytes.
// ---------------------------------------------------------------------------

inline nlohmann::json sample_to_json(const Sample& s) {
  return nlohmann::json{{"sample_id", s.sample_id},
                        {"demand", s.demand.values},
                        {"commitment", s.commitment},
                        {"objective", s.objective},
                        {"solve_time", s.solve_time}};
}

inline Sample sample_from_json(const nlohmann::json& j) {
  try {
    Sample s;
    s.sample_id = j.at("sample_id").get<int>();
    s.demand.values = j.at("demand").get<std::vector<std::vector<double>>>();
    s.commitment = j.at("commitment").get<std::vector<std::vector<int>>>();
    s.objective = j.at("objective").get<double>();
    s.solve_time = j.at("solve_time").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad sample record: ") + e.what());
  }
}

inline void save_samples(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  for (const auto& s : ds.samples) out << sample_to_json(s).dump() << "\n";
}

inline void save_manifest(const Dataset& ds, const std::string& path) {
  nlohmann::json j{{"system_hash", ds.system_hash},
                   {"params",
                    {{"global_sigma", ds.params.global_sigma},
                     {"nodal_sigma", ds.params.nodal_sigma},
                     {"master_seed", ds.params.master_seed}}},
                   {"sample_count", ds.samples.size()}};
  if (ds.has_split)
    j["split"] = {{"seed", ds.split.seed},
                  {"train_ids", ds.split.train_ids},
                  {"test_ids", ds.split.test_ids}};
  else
    j["split"] = nullptr;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline void save_dataset(const Dataset& ds, const std::string& samples_path,
                         const std::string& manifest_path) {
  save_samples(ds, samples_path);
  save_manifest(ds, manifest_path);
}

inline Dataset load_dataset(const std::string& samples_path, const std::string& manifest_path) {
  Dataset ds;
  std::ifstream in(samples_path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + samples_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad sample line: ") + e.what());
    }
    ds.samples.push_back(sample_from_json(j));
  }

  std::ifstream min(manifest_path, std::ios::binary);
  if (!min) throw ParseError("cannot open " + manifest_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(min);
    ds.system_hash = j.at("system_hash").get<std::string>();
    const auto& p = j.at("params");
    ds.params.global_sigma = p.at("global_sigma").get<double>();
    ds.params.nodal_sigma = p.at("nodal_sigma").get<double>();
    ds.params.master_seed = p.at("master_seed").get<std::uint64_t>();
    if (!j.at("split").is_null()) {
      ds.has_split = true;
      ds.split.seed = j["split"].at("seed").get<std::uint64_t>();
      ds.split.train_ids = j["split"].at("train_ids").get<std::vector<int>>();
      ds.split.test_ids = j["split"].at("test_ids").get<std::vector<int>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  return ds;
}

/// Subset view helpers used by training and evaluation.
inline std::vector<const Sample*> select_samples(const Dataset& ds,
                                                 const std::vector<int>& ids) {
  std::vector<const Sample*> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(&ds.by_id(id));
  return out;
}

}  // namespace uclab
