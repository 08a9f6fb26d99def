// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uclab/common.hpp"

namespace uclab {

// ---------------------------------------------------------------------------
// Static power-system data model. All objects are immutable after
// construction/validation and safe to share read-only across workers.
// ---------------------------------------------------------------------------

struct Bus {
  int id = 0;
  std::vector<double> base_demand;  // MW, one entry per period
};

struct Branch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;   // per-unit, > 0
  double flow_limit = 0.0;  // MW, > 0
};

struct Generator {
  int id = 0;
  int bus = 0;
  double p_min = 0.0;       // MW
  double p_max = 0.0;       // MW
  double ramp_hourly = 0.0; // MW/h
  double ramp_10min = 0.0;  // MW per 10 minutes
  double cost_energy = 0.0; // $/MWh
  double cost_noload = 0.0; // $/h
  double cost_startup = 0.0;// $
  int initial_status = 0;   // 0 or 1, commitment before the first period
};

struct GridSystem {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  int reference_bus = 0;
  int n_periods = 0;

  int bus_index(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == bus_id) return static_cast<int>(i);
    return -1;
  }
};

/// Per-bus per-period demand, MW. Row b corresponds to system.buses[b].
struct DemandProfile {
  std::vector<std::vector<double>> values;  // n_buses x n_periods

  int n_buses() const { return static_cast<int>(values.size()); }
  int n_periods() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate_system(const GridSystem& sys) {
  if (sys.n_periods < 1) throw ValidationError("n_periods must be >= 1");
  if (sys.buses.empty()) throw ValidationError("system has no buses");
  if (sys.generators.empty()) throw ValidationError("system has no generators");

  std::set<int> bus_ids;
  for (const auto& b : sys.buses) {
    if (!bus_ids.insert(b.id).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (static_cast<int>(b.base_demand.size()) != sys.n_periods)
      throw ValidationError("bus " + std::to_string(b.id) + ": base_demand length " +
                            std::to_string(b.base_demand.size()) + " != n_periods");
    for (double d : b.base_demand)
      if (!(d >= 0.0))
        throw ValidationError("bus " + std::to_string(b.id) + ": base_demand entry negative");
  }
  if (bus_ids.count(sys.reference_bus) == 0)
    throw ValidationError("reference_bus " + std::to_string(sys.reference_bus) + " does not exist");

  std::set<int> branch_ids;
  for (const auto& br : sys.branches) {
    std::string tag = "branch " + std::to_string(br.id);
    if (!branch_ids.insert(br.id).second) throw ValidationError("duplicate " + tag);
    if (br.from_bus == br.to_bus) throw ValidationError(tag + ": from_bus equals to_bus");
    if (bus_ids.count(br.from_bus) == 0) throw ValidationError(tag + ": from_bus does not exist");
    if (bus_ids.count(br.to_bus) == 0) throw ValidationError(tag + ": to_bus does not exist");
    if (!(br.reactance > 0.0)) throw ValidationError(tag + ": reactance must be > 0");
    if (!(br.flow_limit > 0.0)) throw ValidationError(tag + ": flow_limit must be > 0");
  }

  std::set<int> gen_ids;
  double total_pmax = 0.0;
  for (const auto& g : sys.generators) {
    std::string tag = "generator " + std::to_string(g.id);
    if (!gen_ids.insert(g.id).second) throw ValidationError("duplicate " + tag);
    if (bus_ids.count(g.bus) == 0) throw ValidationError(tag + ": bus does not exist");
    if (!(g.p_min >= 0.0)) throw ValidationError(tag + ": p_min must be >= 0");
    if (g.p_min > g.p_max) throw ValidationError(tag + ": p_min exceeds p_max");
    if (!(g.ramp_hourly >= 0.0)) throw ValidationError(tag + ": ramp_hourly must be >= 0");
    if (!(g.ramp_10min >= 0.0)) throw ValidationError(tag + ": ramp_10min must be >= 0");
    if (!(g.cost_energy >= 0.0)) throw ValidationError(tag + ": cost_energy must be >= 0");
    if (!(g.cost_noload >= 0.0)) throw ValidationError(tag + ": cost_noload must be >= 0");
    if (!(g.cost_startup >= 0.0)) throw ValidationError(tag + ": cost_startup must be >= 0");
    if (g.initial_status != 0 && g.initial_status != 1)
      throw ValidationError(tag + ": initial_status must be 0 or 1");
    total_pmax += g.p_max;
  }

  // Capacity must cover the base profile peak, otherwise the base case is
  // provably infeasible.
  for (int t = 0; t < sys.n_periods; ++t) {
    double load = 0.0;
    for (const auto& b : sys.buses) load += b.base_demand[static_cast<std::size_t>(t)];
    if (load > total_pmax)
      throw ValidationError("total generation capacity " + format_double(total_pmax) +
                            " below base demand " + format_double(load) + " in period " +
                            std::to_string(t));
  }
}

inline void validate_profile(const GridSystem& sys, const DemandProfile& profile) {
  if (profile.n_buses() != static_cast<int>(sys.buses.size()) ||
      profile.n_periods() != sys.n_periods)
    throw DimensionMismatch("demand profile is " + std::to_string(profile.n_buses()) + "x" +
                            std::to_string(profile.n_periods()) + ", system wants " +
                            std::to_string(sys.buses.size()) + "x" +
                            std::to_string(sys.n_periods));
  for (const auto& row : profile.values)
    for (double v : row)
      if (!(v >= 0.0)) throw ValidationError("demand profile entry negative");
}

// ---------------------------------------------------------------------------
// System file I/O (JSON)
// ---------------------------------------------------------------------------

inline nlohmann::json system_to_json(const GridSystem& sys) {
  nlohmann::json j;
  j["n_periods"] = sys.n_periods;
  j["reference_bus"] = sys.reference_bus;
  j["buses"] = nlohmann::json::array();
  for (const auto& b : sys.buses)
    j["buses"].push_back({{"id", b.id}, {"base_demand", b.base_demand}});
  j["branches"] = nlohmann::json::array();
  for (const auto& br : sys.branches)
    j["branches"].push_back({{"id", br.id},
                             {"from", br.from_bus},
                             {"to", br.to_bus},
                             {"reactance", br.reactance},
                             {"flow_limit", br.flow_limit}});
  j["generators"] = nlohmann::json::array();
  for (const auto& g : sys.generators)
    j["generators"].push_back({{"id", g.id},
                               {"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"ramp_hourly", g.ramp_hourly},
                               {"ramp_10min", g.ramp_10min},
                               {"cost_energy", g.cost_energy},
                               {"cost_noload", g.cost_noload},
                               {"cost_startup", g.cost_startup},
                               {"initial_status", g.initial_status}});
  return j;
}

inline GridSystem system_from_json(const nlohmann::json& j) {
  GridSystem sys;
  try {
    sys.n_periods = j.at("n_periods").get<int>();
    sys.reference_bus = j.at("reference_bus").get<int>();
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      b.base_demand = jb.at("base_demand").get<std::vector<double>>();
      sys.buses.push_back(std::move(b));
    }
    for (const auto& jb : j.at("branches")) {
      Branch br;
      br.id = jb.at("id").get<int>();
      br.from_bus = jb.at("from").get<int>();
      br.to_bus = jb.at("to").get<int>();
      br.reactance = jb.at("reactance").get<double>();
      br.flow_limit = jb.at("flow_limit").get<double>();
      sys.branches.push_back(br);
    }
    for (const auto& jg : j.at("generators")) {
      Generator g;
      g.id = jg.at("id").get<int>();
      g.bus = jg.at("bus").get<int>();
      g.p_min = jg.at("p_min").get<double>();
      g.p_max = jg.at("p_max").get<double>();
      g.ramp_hourly = jg.at("ramp_hourly").get<double>();
      g.ramp_10min = jg.at("ramp_10min").get<double>();
      g.cost_energy = jg.at("cost_energy").get<double>();
      g.cost_noload = jg.at("cost_noload").get<double>();
      g.cost_startup = jg.at("cost_startup").get<double>();
      g.initial_status = jg.value("initial_status", 0);
      sys.generators.push_back(g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("system schema: ") + e.what());
  }
  validate_system(sys);
  return sys;
}

inline GridSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open system file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed system file " + path + ": " + e.what());
  }
  return system_from_json(j);
}

inline void save_system(const GridSystem& sys, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write system file: " + path);
  out << system_to_json(sys).dump(2) << "\n";
}

/// The standard nodal profile: the per-bus base_demand vectors as a matrix.
inline DemandProfile base_profile(const GridSystem& sys) {
  DemandProfile p;
  p.values.reserve(sys.buses.size());
  for (const auto& b : sys.buses) p.values.push_back(b.base_demand);
  return p;
}

// ---------------------------------------------------------------------------
// Stand-alone demand profile files: CSV, one row per bus, first column the
// bus id followed by n_periods values.
// ---------------------------------------------------------------------------

inline void save_profile_csv(const GridSystem& sys, const DemandProfile& profile,
                             const std::string& path) {
  validate_profile(sys, profile);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write profile file: " + path);
  for (std::size_t b = 0; b < sys.buses.size(); ++b) {
    out << sys.buses[b].id;
    for (double v : profile.values[b]) out << "," << format_double(v);
    out << "\n";
  }
}

inline DemandProfile load_profile_csv(const GridSystem& sys, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile file: " + path);
  std::map<int, std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    int bus_id = 0;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          bus_id = std::stoi(cell);
          first = false;
        } else {
          vals.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw ParseError("profile " + path + " line " + std::to_string(line_no) +
                         ": bad number '" + cell + "'");
      }
    }
    if (first) throw ParseError("profile " + path + " line " + std::to_string(line_no) + ": empty row");
    if (!rows.emplace(bus_id, std::move(vals)).second)
      throw ParseError("profile " + path + ": duplicate bus id " + std::to_string(bus_id));
  }
  DemandProfile p;
  p.values.resize(sys.buses.size());
  for (std::size_t b = 0; b < sys.buses.size(); ++b) {
    auto it = rows.find(sys.buses[b].id);
    if (it == rows.end())
      throw ParseError("profile " + path + ": missing row for bus " +
                       std::to_string(sys.buses[b].id));
    p.values[b] = it->second;
  }
  validate_profile(sys, p);
  return p;
}

// ---------------------------------------------------------------------------
// Canonical digests used to tie datasets and models to the system they came
// from.
// ---------------------------------------------------------------------------

inline std::string system_hash(const GridSystem& sys) {
  return hex64(fnv1a64(system_to_json(sys).dump()));
}

inline std::string profile_hash(const DemandProfile& profile) {
  std::string blob;
  for (const auto& row : profile.values)
    for (double v : row) {
      blob += format_double(v);
      blob += ';';
    }
  return hex64(fnv1a64(blob));
}

}  // namespace uclab
