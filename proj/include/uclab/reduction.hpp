// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uclab/logreg.hpp"
#include "uclab/mip.hpp"
#include "uclab/scuc.hpp"

namespace uclab {

enum class ProcedureId : uint8_t { B1, B2, P1, P2 };

inline const char* to_string(ProcedureId p) {
  switch (p) {
    case ProcedureId::B1: return "b1";
    case ProcedureId::B2: return "b2";
    case ProcedureId::P1: return "p1";
    default: return "p2";
  }
}

inline ProcedureId procedure_from_string(const std::string& s) {
  if (s == "b1" || s == "B1") return ProcedureId::B1;
  if (s == "b2" || s == "B2") return ProcedureId::B2;
  if (s == "p1" || s == "P1") return ProcedureId::P1;
  if (s == "p2" || s == "P2") return ProcedureId::P2;
  throw ValidationError("unknown procedure '" + s + "'");
}

struct ReductionOutcome {
  ProcedureId procedure = ProcedureId::B1;
  MipStatus status = MipStatus::Infeasible;
  bool has_objective = false;
  double objective = 0.0;
  double wall_time = 0.0;   // solve phase only
  double build_time = 0.0;  // model construction and fixing
  ProblemStats stats;
  int n_fixed_u = 0;
  int n_fixed_v = 0;
  long long nodes_explored = 0;
};

struct FixingCounts {
  int n_fixed_u = 0;
  int n_fixed_v = 0;
};

/// Predicted fixing footprint, computable without touching a solver. The v
/// counts follow the elimination rule: a start-up is pinned once the
/// commitments on both sides of its transition are pinned (period 0 leans on
/// the known initial status).
inline FixingCounts fixing_counts(const PredictionSet& pred, ProcedureId proc) {
  FixingCounts out;
  auto ng = pred.classified.size();
  auto nt = ng ? pred.classified[0].size() : 0;
  auto count_gen = [&](std::size_t g, bool all_periods) {
    if (!all_periods) return;
    out.n_fixed_u += static_cast<int>(nt);
    out.n_fixed_v += static_cast<int>(nt);
  };
  switch (proc) {
    case ProcedureId::B1:
      break;
    case ProcedureId::B2:
      out.n_fixed_u = static_cast<int>(ng * nt);
      out.n_fixed_v = static_cast<int>(ng * nt);
      break;
    case ProcedureId::P1:
      for (std::size_t g = 0; g < ng; ++g)
        for (std::size_t t = 0; t < nt; ++t) {
          if (pred.classified[g][t] != 1) continue;
          ++out.n_fixed_u;
          if (t == 0 || pred.classified[g][t - 1] == 1) ++out.n_fixed_v;
        }
      break;
    case ProcedureId::P2:
      for (std::size_t g = 0; g < ng; ++g) {
        bool all_on = true, all_off = true;
        for (std::size_t t = 0; t < nt; ++t) {
          if (pred.classified[g][t]) all_off = false;
          else all_on = false;
        }
        count_gen(g, all_on || all_off);
      }
      break;
  }
  return out;
}

namespace detail {

inline void check_prediction_shape(const ScucProblem& pr, const PredictionSet& pred) {
  if (static_cast<int>(pred.classified.size()) != pr.n_generators)
    throw ShapeMismatch("prediction generator count does not match the system");
  for (const auto& row : pred.classified)
    if (static_cast<int>(row.size()) != pr.n_periods)
      throw ShapeMismatch("prediction period count does not match the system");
}

inline ReductionOutcome from_mip(ProcedureId proc, const ScucProblem& reduced,
                                 const MipResult& res, double build_time,
                                 const FixingCounts& fc) {
  ReductionOutcome out;
  out.procedure = proc;
  out.status = res.status;
  out.has_objective = res.has_incumbent;
  if (res.has_incumbent) out.objective = res.incumbent.objective;
  out.wall_time = res.wall_time;
  out.build_time = build_time;
  out.stats = problem_stats(reduced);
  out.n_fixed_u = fc.n_fixed_u;
  out.n_fixed_v = fc.n_fixed_v;
  out.nodes_explored = res.nodes_explored;
  return out;
}

}  // namespace detail

/// Full MILP, no predictions involved.
inline ReductionOutcome run_b1(const GridSystem& system, const DemandProfile& demand,
                               const MipOptions& options = {}) {
  double t0 = wall_clock_seconds();
  auto pr = build_scuc(system, demand);
  double build = wall_clock_seconds() - t0;
  auto res = solve_mip(pr, options);
  return detail::from_mip(ProcedureId::B1, pr, res, build, {});
}

/// Every commitment pinned to the classifier output; the remainder is a pure
/// dispatch LP. An infeasible LP here is a recorded result, not a failure.
inline ReductionOutcome run_b2(const GridSystem& system, const DemandProfile& demand,
                               const PredictionSet& prediction, const MipOptions& options = {}) {
  (void)options;  // no branching happens; kept for signature symmetry
  double t0 = wall_clock_seconds();
  auto pr = build_scuc(system, demand);
  detail::check_prediction_shape(pr, prediction);
  ScucProblem reduced;
  std::vector<CommitFix> fixes;
  for (int g = 0; g < pr.n_generators; ++g)
    for (int t = 0; t < pr.n_periods; ++t)
      fixes.push_back(
          {g, t, prediction.classified[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)]});
  reduced = apply_fixings(pr, fixes);
  double build = wall_clock_seconds() - t0;

  t0 = wall_clock_seconds();
  auto sol = solve_lp(reduced.lp);
  double solve_time = wall_clock_seconds() - t0;

  ReductionOutcome out;
  out.procedure = ProcedureId::B2;
  out.status = sol.status == LpStatus::Optimal ? MipStatus::OptimalWithinGap
                                               : MipStatus::Infeasible;
  out.has_objective = sol.status == LpStatus::Optimal;
  if (out.has_objective) out.objective = sol.objective;
  out.wall_time = solve_time;
  out.build_time = build;
  out.stats = problem_stats(reduced);
  auto fc = fixing_counts(prediction, ProcedureId::B2);
  out.n_fixed_u = fc.n_fixed_u;
  out.n_fixed_v = fc.n_fixed_v;
  out.nodes_explored = 0;
  return out;
}

/// Predicted-ON commitments are pinned; everything else stays binary with a
/// warm start of 0 on the free commitments.
inline ReductionOutcome run_p1(const GridSystem& system, const DemandProfile& demand,
                               const PredictionSet& prediction, const MipOptions& options = {}) {
  double t0 = wall_clock_seconds();
  auto pr = build_scuc(system, demand);
  detail::check_prediction_shape(pr, prediction);
  std::vector<CommitFix> fixes;
  for (int g = 0; g < pr.n_generators; ++g)
    for (int t = 0; t < pr.n_periods; ++t)
      if (prediction.classified[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)] == 1)
        fixes.push_back({g, t, 1});
  auto reduced = apply_fixings(pr, fixes);
  WarmStart warm;
  for (int g = 0; g < reduced.n_generators; ++g)
    for (int t = 0; t < reduced.n_periods; ++t)
      if (reduced.column(VarKind::Commit, g, t) >= 0) warm.binary_values[{g, t}] = 0;
  double build = wall_clock_seconds() - t0;

  auto res = solve_mip(reduced, options, &warm);
  return detail::from_mip(ProcedureId::P1, reduced, res, build,
                          fixing_counts(prediction, ProcedureId::P1));
}

/// Generators predicted always-ON or always-OFF over the horizon are pinned
/// whole; the rest keep their binaries and carry the predicted pattern as a
/// warm start.
inline ReductionOutcome run_p2(const GridSystem& system, const DemandProfile& demand,
                               const PredictionSet& prediction, const MipOptions& options = {}) {
  double t0 = wall_clock_seconds();
  auto pr = build_scuc(system, demand);
  detail::check_prediction_shape(pr, prediction);
  std::vector<CommitFix> fixes;
  for (int g = 0; g < pr.n_generators; ++g) {
    bool all_on = true, all_off = true;
    for (int t = 0; t < pr.n_periods; ++t) {
      if (prediction.classified[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)])
        all_off = false;
      else
        all_on = false;
    }
    if (all_on || all_off)
      for (int t = 0; t < pr.n_periods; ++t) fixes.push_back({g, t, all_on ? 1 : 0});
  }
  auto reduced = apply_fixings(pr, fixes);
  WarmStart warm;
  for (int g = 0; g < reduced.n_generators; ++g)
    for (int t = 0; t < reduced.n_periods; ++t)
      if (reduced.column(VarKind::Commit, g, t) >= 0)
        warm.binary_values[{g, t}] =
            prediction.classified[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)];
  double build = wall_clock_seconds() - t0;

  auto res = solve_mip(reduced, options, &warm);
  return detail::from_mip(ProcedureId::P2, reduced, res, build,
                          fixing_counts(prediction, ProcedureId::P2));
}

inline ReductionOutcome run_procedure(ProcedureId proc, const GridSystem& system,
                                      const DemandProfile& demand,
                                      const PredictionSet& prediction,
                                      const MipOptions& options = {}) {
  switch (proc) {
    case ProcedureId::B1: return run_b1(system, demand, options);
    case ProcedureId::B2: return run_b2(system, demand, prediction, options);
    case ProcedureId::P1: return run_p1(system, demand, prediction, options);
    default: return run_p2(system, demand, prediction, options);
  }
}

}  // namespace uclab
