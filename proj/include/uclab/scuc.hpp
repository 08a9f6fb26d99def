// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "uclab/grid.hpp"
#include "uclab/lp.hpp"

namespace uclab {

enum class VarKind : uint8_t { Dispatch, Reserve, Commit, Startup, Flow, Angle };

inline const char* kind_tag(VarKind k) {
  switch (k) {
    case VarKind::Dispatch: return "P";
    case VarKind::Reserve: return "r";
    case VarKind::Commit: return "u";
    case VarKind::Startup: return "v";
    case VarKind::Flow: return "f";
    default: return "th";
  }
}

struct VarRef {
  VarKind kind = VarKind::Dispatch;
  int entity = 0;  // generator / branch / bus position in system order
  int period = 0;

  friend bool operator<(const VarRef& a, const VarRef& b) {
    return std::tie(a.kind, a.entity, a.period) < std::tie(b.kind, b.entity, b.period);
  }
  friend bool operator==(const VarRef& a, const VarRef& b) {
    return a.kind == b.kind && a.entity == b.entity && a.period == b.period;
  }
};

/// Commitment decision pinned to a constant before solving.
struct CommitFix {
  int gen = 0;  // generator position
  int period = 0;
  int value = 0;  // 0 or 1
};

/// A unit-commitment instance: the LP/MILP rows plus enough bookkeeping to
/// map columns back to named decisions after rounds of variable elimination.
struct ScucProblem {
  LpProblem lp;
  std::vector<VarRef> vars;  // one entry per lp column
  int n_generators = 0;
  int n_periods = 0;
  int n_branches = 0;
  int n_buses = 0;
  std::vector<int> initial_status;
  std::vector<std::pair<VarRef, double>> eliminated;  // removed columns and their values
  bool has_reserve_rows = false;
  std::string system_digest;   // ties the instance to its system file
  std::string profile_digest;  // and to the demand profile it was built from

  // Rebuilt whenever the column set changes.
  std::map<std::tuple<int, int, int>, int> index;

  void rebuild_index() {
    index.clear();
    for (int j = 0; j < lp.n_cols; ++j) {
      const VarRef& v = vars[static_cast<std::size_t>(j)];
      index[{static_cast<int>(v.kind), v.entity, v.period}] = j;
    }
  }

  int column(VarKind k, int entity, int period) const {
    auto it = index.find({static_cast<int>(k), entity, period});
    return it == index.end() ? -1 : it->second;
  }
};

struct ProblemStats {
  int n_linear_vars = 0;
  int n_binary_vars = 0;
  int n_constraints = 0;
  long long n_nonzeros = 0;
  int n_rows_le = 0;
  int n_rows_eq = 0;
};

inline ProblemStats problem_stats(const ScucProblem& pr) {
  ProblemStats st;
  st.n_binary_vars = pr.lp.n_binary();
  st.n_linear_vars = pr.lp.n_cols - st.n_binary_vars;
  for (const auto& row : pr.lp.rows) {
    if (row.sense == RowSense::LE) ++st.n_rows_le; else ++st.n_rows_eq;
    st.n_nonzeros += static_cast<long long>(row.terms.size());
  }
  st.n_constraints = st.n_rows_le + st.n_rows_eq;
  return st;
}

namespace detail {

// Merges duplicate columns, sorts by column, drops exact zeros.
inline void finalize_row(LpRow& row) {
  std::sort(row.terms.begin(), row.terms.end(),
            [](const RowTerm& a, const RowTerm& b) { return a.col < b.col; });
  std::vector<RowTerm> merged;
  for (const auto& t : row.terms) {
    if (!merged.empty() && merged.back().col == t.col)
      merged.back().coef += t.coef;
    else
      merged.push_back(t);
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const RowTerm& t) { return t.coef == 0.0; }),
               merged.end());
  row.terms = std::move(merged);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Instance construction. Row layout, per period: generation window rows and
// reserve capability per generator, ramp envelopes, start-up logic, then the
// per-generator spinning reserve requirement; all equality rows (flow
// definitions, nodal balances) follow after every inequality row.
// ---------------------------------------------------------------------------
inline ScucProblem build_scuc(const GridSystem& sys, const DemandProfile& demand) {
  validate_system(sys);
  validate_profile(sys, demand);

  const int G = static_cast<int>(sys.generators.size());
  const int T = sys.n_periods;
  const int L = static_cast<int>(sys.branches.size());
  const int B = static_cast<int>(sys.buses.size());

  ScucProblem pr;
  pr.n_generators = G;
  pr.n_periods = T;
  pr.n_branches = L;
  pr.n_buses = B;
  pr.system_digest = system_hash(sys);
  pr.profile_digest = profile_hash(demand);
  for (const auto& g : sys.generators) pr.initial_status.push_back(g.initial_status);

  bool reserves = false;
  for (const auto& g : sys.generators)
    if (g.ramp_10min > 0.0) reserves = true;
  pr.has_reserve_rows = reserves;

  auto add_var = [&](VarKind k, int entity, int period, double cost, double lo, double hi,
                     bool binary) {
    pr.lp.add_col(cost, lo, hi, binary);
    pr.vars.push_back({k, entity, period});
  };

  for (int g = 0; g < G; ++g)
    for (int t = 0; t < T; ++t)
      add_var(VarKind::Dispatch, g, t, sys.generators[static_cast<std::size_t>(g)].cost_energy,
              0.0, sys.generators[static_cast<std::size_t>(g)].p_max, false);
  for (int g = 0; g < G; ++g)
    for (int t = 0; t < T; ++t)
      add_var(VarKind::Reserve, g, t, 0.0, 0.0,
              sys.generators[static_cast<std::size_t>(g)].ramp_10min, false);
  for (int g = 0; g < G; ++g)
    for (int t = 0; t < T; ++t)
      add_var(VarKind::Commit, g, t, sys.generators[static_cast<std::size_t>(g)].cost_noload,
              0.0, 1.0, true);
  for (int g = 0; g < G; ++g)
    for (int t = 0; t < T; ++t)
      add_var(VarKind::Startup, g, t, sys.generators[static_cast<std::size_t>(g)].cost_startup,
              0.0, 1.0, true);
  for (int l = 0; l < L; ++l)
    for (int t = 0; t < T; ++t)
      add_var(VarKind::Flow, l, t, 0.0, -sys.branches[static_cast<std::size_t>(l)].flow_limit,
              sys.branches[static_cast<std::size_t>(l)].flow_limit, false);
  int ref_pos = sys.bus_index(sys.reference_bus);
  for (int b = 0; b < B; ++b) {
    if (b == ref_pos) continue;
    for (int t = 0; t < T; ++t) add_var(VarKind::Angle, b, t, 0.0, -kInf, kInf, false);
  }
  pr.rebuild_index();

  auto P = [&](int g, int t) { return pr.column(VarKind::Dispatch, g, t); };
  auto R = [&](int g, int t) { return pr.column(VarKind::Reserve, g, t); };
  auto U = [&](int g, int t) { return pr.column(VarKind::Commit, g, t); };
  auto V = [&](int g, int t) { return pr.column(VarKind::Startup, g, t); };
  auto F = [&](int l, int t) { return pr.column(VarKind::Flow, l, t); };
  auto TH = [&](int b, int t) { return pr.column(VarKind::Angle, b, t); };

  for (int t = 0; t < T; ++t) {
    for (int g = 0; g < G; ++g) {
      const Generator& gen = sys.generators[static_cast<std::size_t>(g)];
      // Generation window: p_min u <= P and P + r <= p_max u.
      auto& lo = pr.lp.add_row(RowSense::LE, 0.0);
      append_term(lo, U(g, t), gen.p_min);
      append_term(lo, P(g, t), -1.0);
      detail::finalize_row(lo);
      auto& hi = pr.lp.add_row(RowSense::LE, 0.0);
      append_term(hi, P(g, t), 1.0);
      append_term(hi, R(g, t), 1.0);
      append_term(hi, U(g, t), -gen.p_max);
      detail::finalize_row(hi);
      // Reserve capability: r <= ramp_10min u.
      auto& cap = pr.lp.add_row(RowSense::LE, 0.0);
      append_term(cap, R(g, t), 1.0);
      append_term(cap, U(g, t), -gen.ramp_10min);
      detail::finalize_row(cap);
    }
    for (int g = 0; g < G; ++g) {
      const Generator& gen = sys.generators[static_cast<std::size_t>(g)];
      if (t >= 1) {
        // Upward ramp with start-up allowance p_min.
        auto& up = pr.lp.add_row(RowSense::LE, 0.0);
        append_term(up, P(g, t), 1.0);
        append_term(up, P(g, t - 1), -1.0);
        append_term(up, U(g, t - 1), -gen.ramp_hourly);
        append_term(up, V(g, t), -gen.p_min);
        detail::finalize_row(up);
        // Downward ramp with shut-down allowance p_max.
        auto& dn = pr.lp.add_row(RowSense::LE, 0.0);
        append_term(dn, P(g, t - 1), 1.0);
        append_term(dn, P(g, t), -1.0);
        append_term(dn, U(g, t), -gen.ramp_hourly);
        append_term(dn, U(g, t - 1), -gen.p_max);
        append_term(dn, U(g, t), gen.p_max);
        append_term(dn, V(g, t), -gen.p_max);
        detail::finalize_row(dn);
      } else if (gen.initial_status == 1) {
        // Same envelopes against the pre-horizon point (u = 1, P = p_min).
        auto& up = pr.lp.add_row(RowSense::LE, gen.p_min + gen.ramp_hourly);
        append_term(up, P(g, 0), 1.0);
        append_term(up, V(g, 0), -gen.p_min);
        detail::finalize_row(up);
        auto& dn = pr.lp.add_row(RowSense::LE, gen.p_max - gen.p_min);
        append_term(dn, P(g, 0), -1.0);
        append_term(dn, U(g, 0), gen.p_max - gen.ramp_hourly);
        append_term(dn, V(g, 0), -gen.p_max);
        detail::finalize_row(dn);
      }
      // A unit starting from rest has no pre-horizon output to ramp from, so
      // its first period carries no ramp rows at all.
    }
    for (int g = 0; g < G; ++g) {
      int init = sys.generators[static_cast<std::size_t>(g)].initial_status;
      // Start-up logic: v >= u_t - u_{t-1}, v <= u_t, v <= 1 - u_{t-1}.
      auto& f1 = pr.lp.add_row(RowSense::LE, t == 0 ? static_cast<double>(init) : 0.0);
      append_term(f1, U(g, t), 1.0);
      if (t > 0) append_term(f1, U(g, t - 1), -1.0);
      append_term(f1, V(g, t), -1.0);
      detail::finalize_row(f1);
      auto& f2 = pr.lp.add_row(RowSense::LE, 0.0);
      append_term(f2, V(g, t), 1.0);
      append_term(f2, U(g, t), -1.0);
      detail::finalize_row(f2);
      auto& f3 = pr.lp.add_row(RowSense::LE, t == 0 ? 1.0 - static_cast<double>(init) : 1.0);
      append_term(f3, V(g, t), 1.0);
      if (t > 0) append_term(f3, U(g, t - 1), 1.0);
      detail::finalize_row(f3);
    }
    if (reserves) {
      // Spinning reserve must cover the loss of any single generator.
      for (int g = 0; g < G; ++g) {
        auto& res = pr.lp.add_row(RowSense::LE, 0.0);
        append_term(res, P(g, t), 1.0);
        for (int o = 0; o < G; ++o)
          if (o != g) append_term(res, R(o, t), -1.0);
        detail::finalize_row(res);
      }
    }
  }

  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      const Branch& br = sys.branches[static_cast<std::size_t>(l)];
      int bf = sys.bus_index(br.from_bus);
      int bt = sys.bus_index(br.to_bus);
      double w = 1.0 / br.reactance;
      // f = (angle_from - angle_to) / x, reference angle pinned at zero.
      auto& def = pr.lp.add_row(RowSense::EQ, 0.0);
      append_term(def, F(l, t), 1.0);
      if (bf != ref_pos) append_term(def, TH(bf, t), -w);
      if (bt != ref_pos) append_term(def, TH(bt, t), w);
      detail::finalize_row(def);
    }
    for (int b = 0; b < B; ++b) {
      auto& bal = pr.lp.add_row(RowSense::EQ, demand.values[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)]);
      for (int g = 0; g < G; ++g)
        if (sys.bus_index(sys.generators[static_cast<std::size_t>(g)].bus) == b)
          append_term(bal, P(g, t), 1.0);
      for (int l = 0; l < L; ++l) {
        const Branch& br = sys.branches[static_cast<std::size_t>(l)];
        if (sys.bus_index(br.to_bus) == b) append_term(bal, F(l, t), 1.0);
        if (sys.bus_index(br.from_bus) == b) append_term(bal, F(l, t), -1.0);
      }
      detail::finalize_row(bal);
    }
  }
  return pr;
}

// ---------------------------------------------------------------------------
// Variable elimination. Fixing a commitment decision removes its column,
// folds the constant through every row and the objective, and removes any
// start-up column whose value becomes implied by two adjacent fixed
// commitments. Rows left with no terms must hold as pure constants or the
// result is marked infeasible outright.
// ---------------------------------------------------------------------------
inline ScucProblem apply_fixings(const ScucProblem& base, const std::vector<CommitFix>& fixes) {
  // Current fixed-commitment picture from prior eliminations.
  std::map<std::pair<int, int>, int> committed;
  std::map<std::pair<int, int>, int> started;
  for (const auto& [ref, val] : base.eliminated) {
    if (ref.kind == VarKind::Commit)
      committed[{ref.entity, ref.period}] = static_cast<int>(val);
    else if (ref.kind == VarKind::Startup)
      started[{ref.entity, ref.period}] = static_cast<int>(val);
  }

  std::map<int, double> fix_value;  // column -> constant, for this round
  for (const auto& f : fixes) {
    if (f.value != 0 && f.value != 1)
      throw ValidationError("commitment fix value must be 0 or 1");
    if (f.gen < 0 || f.gen >= base.n_generators || f.period < 0 || f.period >= base.n_periods)
      throw ValidationError("commitment fix out of range: generator " + std::to_string(f.gen) +
                            ", period " + std::to_string(f.period));
    auto key = std::make_pair(f.gen, f.period);
    auto prev = committed.find(key);
    if (prev != committed.end()) {
      if (prev->second != f.value)
        throw ConflictError("generator " + std::to_string(f.gen) + " period " +
                            std::to_string(f.period) + " already fixed to " +
                            std::to_string(prev->second));
      continue;  // idempotent
    }
    committed[key] = f.value;
    int col = base.column(VarKind::Commit, f.gen, f.period);
    if (col < 0) throw ConflictError("commitment column missing for an unfixed decision");
    fix_value[col] = static_cast<double>(f.value);
  }

  // Start-ups implied by adjacent fixed commitments.
  for (int g = 0; g < base.n_generators; ++g) {
    for (int t = 0; t < base.n_periods; ++t) {
      auto now = committed.find({g, t});
      if (now == committed.end()) continue;
      int prev_u;
      if (t == 0) {
        prev_u = base.initial_status[static_cast<std::size_t>(g)];
      } else {
        auto prev = committed.find({g, t - 1});
        if (prev == committed.end()) continue;
        prev_u = prev->second;
      }
      int v = std::max(0, now->second - prev_u);
      auto known = started.find({g, t});
      if (known != started.end()) {
        if (known->second != v)
          throw ConflictError("implied start-up contradicts an earlier elimination");
        continue;
      }
      int col = base.column(VarKind::Startup, g, t);
      if (col >= 0) {
        started[{g, t}] = v;
        fix_value[col] = static_cast<double>(v);
      }
    }
  }

  ScucProblem out;
  out.n_generators = base.n_generators;
  out.n_periods = base.n_periods;
  out.n_branches = base.n_branches;
  out.n_buses = base.n_buses;
  out.initial_status = base.initial_status;
  out.has_reserve_rows = base.has_reserve_rows;
  out.system_digest = base.system_digest;
  out.profile_digest = base.profile_digest;
  out.eliminated = base.eliminated;
  out.lp.objective_offset = base.lp.objective_offset;
  out.lp.trivially_infeasible = base.lp.trivially_infeasible;

  std::vector<int> remap(static_cast<std::size_t>(base.lp.n_cols), -1);
  for (int j = 0; j < base.lp.n_cols; ++j) {
    auto it = fix_value.find(j);
    if (it != fix_value.end()) {
      out.eliminated.emplace_back(base.vars[static_cast<std::size_t>(j)], it->second);
      out.lp.objective_offset += base.lp.cost[static_cast<std::size_t>(j)] * it->second;
      continue;
    }
    remap[static_cast<std::size_t>(j)] =
        out.lp.add_col(base.lp.cost[static_cast<std::size_t>(j)],
                       base.lp.lower[static_cast<std::size_t>(j)],
                       base.lp.upper[static_cast<std::size_t>(j)],
                       base.lp.is_binary[static_cast<std::size_t>(j)] != 0);
    out.vars.push_back(base.vars[static_cast<std::size_t>(j)]);
  }

  for (const auto& row : base.lp.rows) {
    LpRow next;
    next.sense = row.sense;
    next.rhs = row.rhs;
    for (const auto& term : row.terms) {
      auto it = fix_value.find(term.col);
      if (it != fix_value.end()) {
        next.rhs -= term.coef * it->second;
        continue;
      }
      next.terms.push_back({remap[static_cast<std::size_t>(term.col)], term.coef});
    }
    if (next.terms.empty()) {
      bool holds = (next.sense == RowSense::LE) ? (next.rhs >= -1e-9)
                                                : (std::abs(next.rhs) <= 1e-9);
      if (!holds) out.lp.trivially_infeasible = true;
      continue;  // constant row: either vacuous or a recorded contradiction
    }
    out.lp.rows.push_back(std::move(next));
  }
  out.rebuild_index();
  return out;
}

// ---------------------------------------------------------------------------
// Solution expansion back to full matrices over (generator, period).
// ---------------------------------------------------------------------------
struct ScucSolution {
  std::vector<std::vector<double>> dispatch;  // [gen][period]
  std::vector<std::vector<double>> reserve;
  std::vector<std::vector<int>> commit;
  std::vector<std::vector<int>> startup;
};

inline ScucSolution expand_solution(const ScucProblem& pr, const std::vector<double>& values,
                                    double integrality_tol = 1e-6) {
  if (static_cast<int>(values.size()) != pr.lp.n_cols)
    throw DimensionMismatch("value vector does not match column count");
  ScucSolution s;
  auto grid = [&](auto& m, auto zero) {
    m.assign(static_cast<std::size_t>(pr.n_generators),
             std::vector<decltype(zero)>(static_cast<std::size_t>(pr.n_periods), zero));
  };
  grid(s.dispatch, 0.0);
  grid(s.reserve, 0.0);
  grid(s.commit, 0);
  grid(s.startup, 0);

  auto put = [&](const VarRef& ref, double val) {
    auto g = static_cast<std::size_t>(ref.entity);
    auto t = static_cast<std::size_t>(ref.period);
    switch (ref.kind) {
      case VarKind::Dispatch: s.dispatch[g][t] = val; break;
      case VarKind::Reserve: s.reserve[g][t] = val; break;
      case VarKind::Commit:
      case VarKind::Startup: {
        int r = static_cast<int>(std::lround(val));
        if (std::abs(val - r) > integrality_tol)
          throw ValidationError(std::string(kind_tag(ref.kind)) + " value " +
                                format_double(val) + " is not integral");
        if (ref.kind == VarKind::Commit) s.commit[g][t] = r; else s.startup[g][t] = r;
        break;
      }
      default: break;  // flows and angles are not reported
    }
  };
  for (int j = 0; j < pr.lp.n_cols; ++j)
    put(pr.vars[static_cast<std::size_t>(j)], values[static_cast<std::size_t>(j)]);
  for (const auto& [ref, val] : pr.eliminated) put(ref, val);
  return s;
}

// ---------------------------------------------------------------------------
// Human-readable dump in an LP-text layout. Column order is the canonical
// (kind, entity, period) order, row order is emission order; output is byte
// stable for a given problem.
// ---------------------------------------------------------------------------
inline std::string var_name(const ScucProblem& pr, int col) {
  const VarRef& v = pr.vars[static_cast<std::size_t>(col)];
  return std::string(kind_tag(v.kind)) + "_" + std::to_string(v.entity) + "_" +
         std::to_string(v.period);
}

inline void dump_problem(const ScucProblem& pr, std::ostream& os) {
  os << "minimize\n ";
  bool any = false;
  for (int j = 0; j < pr.lp.n_cols; ++j) {
    double c = pr.lp.cost[static_cast<std::size_t>(j)];
    if (c == 0.0) continue;
    os << (c >= 0 ? " +" : " -") << format_double(std::abs(c)) << " " << var_name(pr, j);
    any = true;
  }
  if (!any) os << " 0";
  if (pr.lp.objective_offset != 0.0)
    os << " + " << format_double(pr.lp.objective_offset);
  os << "\nsubject to\n";
  for (std::size_t i = 0; i < pr.lp.rows.size(); ++i) {
    const LpRow& row = pr.lp.rows[i];
    os << " c" << i << ":";
    for (const auto& t : row.terms)
      os << (t.coef >= 0 ? " +" : " -") << format_double(std::abs(t.coef)) << " "
         << var_name(pr, t.col);
    os << (row.sense == RowSense::LE ? " <= " : " = ") << format_double(row.rhs) << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < pr.lp.n_cols; ++j) {
    os << " ";
    double lo = pr.lp.lower[static_cast<std::size_t>(j)];
    double hi = pr.lp.upper[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) os << format_double(lo) << " <= "; else os << "-inf <= ";
    os << var_name(pr, j);
    if (std::isfinite(hi)) os << " <= " << format_double(hi); else os << " <= inf";
    if (pr.lp.is_binary[static_cast<std::size_t>(j)]) os << " binary";
    os << "\n";
  }
  os << "end\n";
}

}  // namespace uclab
