// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <set>

#include "uclab/common.hpp"
#include "uclab/grid.hpp"

using namespace uclab;

namespace {

GridSystem tiny_system() {
  GridSystem sys;
  sys.n_periods = 2;
  sys.reference_bus = 1;
  sys.buses = {{1, {10.0, 12.0}}, {2, {5.0, 6.0}}};
  sys.branches = {{1, 1, 2, 0.2, 50.0}};
  Generator g;
  g.id = 1;
  g.bus = 1;
  g.p_min = 2.0;
  g.p_max = 40.0;
  g.ramp_hourly = 30.0;
  g.ramp_10min = 10.0;
  g.cost_energy = 12.0;
  g.cost_noload = 3.0;
  g.cost_startup = 100.0;
  g.initial_status = 1;
  sys.generators = {g};
  return sys;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("splitmix stream is reproducible and well mixed") {
  Rng a(42), b(42), c(43);
  std::vector<uint64_t> va, vb, vc;
  for (int i = 0; i < 100; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
  }
  REQUIRE(va == vb);
  REQUIRE(va != vc);
  std::set<uint64_t> uniq(va.begin(), va.end());
  REQUIRE(uniq.size() == va.size());
}

TEST_CASE("uniform01 stays inside the open unit interval") {
  Rng r(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform01();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  REQUIRE(lo < 0.01);
  REQUIRE(hi > 0.99);
}

TEST_CASE("gaussian draws have sane first moments") {
  Rng r(123);
  double sum = 0.0, sumsq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    double g = r.gaussian();
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.02);
  REQUIRE(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("mix_seed separates streams") {
  REQUIRE(mix_seed(42, 0) != mix_seed(42, 1));
  REQUIRE(mix_seed(42, 0) != mix_seed(43, 0));
  REQUIRE(mix_seed(42, 5) == mix_seed(42, 5));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, v2 = v1, orig = v1;
  Rng a(9), b(9);
  a.shuffle(v1);
  b.shuffle(v2);
  REQUIRE(v1 == v2);
  REQUIRE(v1 != orig);
  std::set<int> s(v1.begin(), v1.end());
  REQUIRE(s.size() == 10);
}

TEST_CASE("fnv1a digest matches reference vectors") {
  REQUIRE(fnv1a64(std::string("")) == 0xcbf29ce484222325ULL);
  REQUIRE(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
  REQUIRE(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
}

TEST_CASE("format_double round-trips through parsing") {
  for (double v : {0.0, 1.0, -1.5, 3.141592653589793, 1e-17, 1234567.8901234567, 2010.0}) {
    std::string s = format_double(v);
    REQUIRE(std::stod(s) == v);
  }
}

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (int h : hits) REQUIRE(h == 1);
}

TEST_CASE("parallel_for propagates worker exceptions") {
  REQUIRE_THROWS_AS(parallel_for(100, 4,
                                 [&](int i) {
                                   if (i == 57) throw ValidationError("boom");
                                 }),
                    ValidationError);
}

TEST_CASE("system validation rejects broken inputs") {
  auto sys = tiny_system();
  REQUIRE_NOTHROW(validate_system(sys));

  auto bad = sys;
  bad.reference_bus = 99;
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.buses[1].base_demand.pop_back();
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.branches[0].reactance = 0.0;
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.branches[0].to_bus = 7;
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.generators[0].p_min = 50.0;
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.generators[0].initial_status = 2;
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.generators.push_back(bad.generators[0]);
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);

  bad = sys;
  bad.generators[0].p_max = 10.0;  // capacity below peak demand
  REQUIRE_THROWS_AS(validate_system(bad), ValidationError);
}

TEST_CASE("system files survive a save/load/save round trip byte for byte") {
  auto sys = tiny_system();
  auto p1 = temp_file("uclab_sys_a.json");
  auto p2 = temp_file("uclab_sys_b.json");
  save_system(sys, p1.string());
  auto loaded = load_system(p1.string());
  save_system(loaded, p2.string());

  std::ifstream f1(p1), f2(p2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  REQUIRE(s1 == s2);
  REQUIRE(!s1.empty());
  REQUIRE(system_hash(sys) == system_hash(loaded));

  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("malformed system files raise parse errors") {
  auto p = temp_file("uclab_sys_bad.json");
  {
    std::ofstream out(p);
    out << "{ not json";
  }
  REQUIRE_THROWS_AS(load_system(p.string()), ParseError);
  {
    std::ofstream out(p);
    out << "{\"n_periods\": 1}";
  }
  REQUIRE_THROWS_AS(load_system(p.string()), ParseError);
  std::filesystem::remove(p);
}

TEST_CASE("demand profile CSV round trip preserves exact values") {
  auto sys = tiny_system();
  DemandProfile prof = base_profile(sys);
  prof.values[0][0] = 10.123456789012345;
  auto p = temp_file("uclab_prof.csv");
  save_profile_csv(sys, prof, p.string());
  auto loaded = load_profile_csv(sys, p.string());
  REQUIRE(loaded.values == prof.values);
  std::filesystem::remove(p);
}

TEST_CASE("profile dimension mismatches are rejected") {
  auto sys = tiny_system();
  DemandProfile prof = base_profile(sys);
  prof.values.pop_back();
  REQUIRE_THROWS_AS(validate_profile(sys, prof), DimensionMismatch);
}

TEST_CASE("system hash reacts to any field change") {
  auto sys = tiny_system();
  auto h0 = system_hash(sys);
  auto sys2 = sys;
  sys2.generators[0].cost_energy += 1e-9;
  REQUIRE(system_hash(sys2) != h0);
  auto sys3 = sys;
  sys3.buses[0].base_demand[1] += 0.5;
  REQUIRE(system_hash(sys3) != h0);
}
