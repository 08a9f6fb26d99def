// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <queue>
#include <utility>
#include <vector>

#include "uclab/scuc.hpp"
#include "uclab/simplex.hpp"

namespace uclab {

enum class MipStatus : uint8_t { OptimalWithinGap, Infeasible, LimitReached };

inline const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::OptimalWithinGap: return "optimal-within-gap";
    case MipStatus::Infeasible: return "infeasible";
    default: return "limit-reached";
  }
}

struct MipOptions {
  double relative_gap = 0.01;
  long long node_limit = 0;  // 0 = unlimited
  double time_limit = 0.0;   // seconds, 0 = unlimited
  int dive_interval = 8;     // depth-first dive cadence
  double integrality_tol = 1e-6;
  std::ostream* node_log = nullptr;
};

struct MipResult {
  MipStatus status = MipStatus::Infeasible;
  bool has_incumbent = false;
  LpSolution incumbent;  // values over the problem's columns
  double best_bound = -kInf;
  double achieved_gap = kInf;
  long long nodes_explored = 0;
  double wall_time = 0.0;
};

/// Candidate commitment pattern used to seed the incumbent. Must cover every
/// free binary commit variable of the problem it is applied to.
struct WarmStart {
  std::map<std::pair<int, int>, int> binary_values;  // (gen, period) -> 0/1
};

namespace detail {

inline double relative_gap_of(double incumbent, double bound) {
  return (incumbent - bound) / std::max(1e-10, std::abs(incumbent));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Branch-and-bound over the binary columns. Node selection is best-first on
// the parent relaxation bound (ties to the oldest node), interleaved with a
// depth-first dive every dive_interval nodes to surface incumbents early.
// Branching picks the most fractional commit column, lowest index on ties.
// ---------------------------------------------------------------------------
class MipSolver {
 public:
  MipSolver(const ScucProblem& pr, MipOptions opt = {})
      : pr_(pr), opt_(opt), solver_(pr.lp) {
    for (int j = 0; j < pr_.lp.n_cols; ++j)
      if (pr_.lp.is_binary[static_cast<std::size_t>(j)]) binaries_.push_back(j);
  }

  MipResult solve(const WarmStart* warm = nullptr) {
    double t0 = wall_clock_seconds();
    MipResult res;
    if (pr_.lp.trivially_infeasible) {
      res.status = MipStatus::Infeasible;
      res.wall_time = wall_clock_seconds() - t0;
      return res;
    }

    double inc_obj = kInf;
    std::vector<double> inc_values;
    bool have_inc = false;

    if (warm) {
      // Seed: pin every free commit to the requested value and dispatch. A
      // feasible dispatch becomes the starting incumbent; this LP does not
      // count as an explored node.
      std::vector<double> lo = pr_.lp.lower, hi = pr_.lp.upper;
      for (int j = 0; j < pr_.lp.n_cols; ++j) {
        const VarRef& ref = pr_.vars[static_cast<std::size_t>(j)];
        if (ref.kind != VarKind::Commit || !pr_.lp.is_binary[static_cast<std::size_t>(j)])
          continue;
        auto it = warm->binary_values.find({ref.entity, ref.period});
        if (it == warm->binary_values.end())
          throw ValidationError("warm start misses generator " + std::to_string(ref.entity) +
                                " period " + std::to_string(ref.period));
        if (it->second != 0 && it->second != 1)
          throw ValidationError("warm start values must be 0 or 1");
        lo[static_cast<std::size_t>(j)] = hi[static_cast<std::size_t>(j)] =
            static_cast<double>(it->second);
      }
      auto seed = solver_.solve_bounded(lo, hi, nullptr, nullptr);
      if (seed.status == LpStatus::Optimal && is_integral(seed.values)) {
        inc_obj = seed.objective;
        inc_values = seed.values;
        have_inc = true;
      }
    }

    // Node arena. Children carry their parent's relaxation bound as the
    // queue priority estimate and are solved lazily on pop.
    struct Node {
      int parent = -1;
      int branch_col = -1;
      double branch_val = 0.0;
      double estimate = -kInf;
      int depth = 0;
      SimplexBasis basis;  // parent's final basis, for the warm start
    };
    std::vector<Node> arena;
    arena.push_back({});  // root

    struct QEntry {
      double estimate;
      int id;
      bool operator<(const QEntry& o) const {  // inverted: priority_queue is max-first
        if (estimate != o.estimate) return estimate > o.estimate;
        return id > o.id;
      }
    };
    std::priority_queue<QEntry> open;
    std::vector<int> dive_stack;
    open.push({-kInf, 0});

    double leaf_bound_min = kInf;  // min bound over closed leaves
    double best_bound = -kInf;
    long long nodes = 0;
    bool limit_hit = false;

    std::vector<double> lo, hi;
    while (!open.empty() || !dive_stack.empty()) {
      if (opt_.node_limit > 0 && nodes >= opt_.node_limit) { limit_hit = true; break; }
      if (opt_.time_limit > 0 && wall_clock_seconds() - t0 >= opt_.time_limit) {
        limit_hit = true;
        break;
      }

      int id;
      bool from_dive = !dive_stack.empty();
      if (from_dive) {
        id = dive_stack.back();
        dive_stack.pop_back();
      } else {
        id = open.top().id;
        open.pop();
      }
      Node& node = arena[static_cast<std::size_t>(id)];

      // Global lower bound: open estimates, the node in hand, closed leaves.
      double lb = node.estimate;
      if (!open.empty()) lb = std::min(lb, open.top().estimate);
      for (int d : dive_stack)
        lb = std::min(lb, arena[static_cast<std::size_t>(d)].estimate);
      lb = std::min(lb, leaf_bound_min);
      if (have_inc) lb = std::min(lb, inc_obj);
      best_bound = std::max(best_bound, lb);

      if (have_inc && detail::relative_gap_of(inc_obj, best_bound) <= opt_.relative_gap) {
        // Remaining nodes cannot improve the incumbent beyond the gap.
        break;
      }
      // Skip nodes that can no longer beat the incumbent by more than the gap.
      if (have_inc && node.estimate >= prune_threshold(inc_obj)) {
        leaf_bound_min = std::min(leaf_bound_min, node.estimate);
        continue;
      }

      // Materialize bounds along the path from the root.
      lo = pr_.lp.lower;
      hi = pr_.lp.upper;
      for (int walk = id; walk > 0; walk = arena[static_cast<std::size_t>(walk)].parent) {
        const Node& n = arena[static_cast<std::size_t>(walk)];
        lo[static_cast<std::size_t>(n.branch_col)] = n.branch_val;
        hi[static_cast<std::size_t>(n.branch_col)] = n.branch_val;
      }

      SimplexBasis out_basis;
      auto rel = solver_.solve_bounded(lo, hi, node.basis.empty() ? nullptr : &node.basis,
                                       &out_basis);
      ++nodes;
      if (opt_.node_log) log_node(*opt_.node_log, nodes, id, node.depth, rel, have_inc, inc_obj);

      if (rel.status != LpStatus::Optimal) continue;  // infeasible subtree: closed, no bound
      double bound = rel.objective;
      if (have_inc && bound >= prune_threshold(inc_obj)) {
        leaf_bound_min = std::min(leaf_bound_min, bound);
        continue;
      }

      int frac_col = pick_branch_column(rel.values);
      if (frac_col < 0) {  // integral point
        leaf_bound_min = std::min(leaf_bound_min, bound);
        if (!have_inc || rel.objective < inc_obj) {
          inc_obj = rel.objective;
          inc_values = rel.values;
          have_inc = true;
        }
        continue;
      }

      bool start_dive = dive_stack.empty() && !from_dive && opt_.dive_interval > 0 &&
                        nodes % opt_.dive_interval == 0;
      if ((id == 0 || start_dive) && (opt_.node_limit == 0 || nodes < opt_.node_limit)) {
        // Round-and-dispatch probe: pin every free commit to the nearest
        // integer and let the LP fill in dispatch and start-ups. Relaxations
        // here sit close to integral points, so this lands a usable
        // incumbent for a single extra LP far more often than not.
        std::vector<double> rlo = lo, rhi = hi;
        for (int j : binaries_) {
          const VarRef& ref = pr_.vars[static_cast<std::size_t>(j)];
          if (ref.kind != VarKind::Commit) continue;
          auto sj = static_cast<std::size_t>(j);
          double v = std::clamp(std::round(rel.values[sj]), lo[sj], hi[sj]);
          rlo[sj] = rhi[sj] = v;
        }
        SimplexBasis probe_basis = out_basis;
        auto probe = solver_.solve_bounded(rlo, rhi, &probe_basis, nullptr);
        ++nodes;
        if (probe.status == LpStatus::Optimal && is_integral(probe.values) &&
            (!have_inc || probe.objective < inc_obj)) {
          inc_obj = probe.objective;
          inc_values = probe.values;
          have_inc = true;
        }
      }

      double x = rel.values[static_cast<std::size_t>(frac_col)];
      int up_first = x >= 0.5 ? 1 : 0;
      Node down, up;
      down.parent = up.parent = id;
      down.branch_col = up.branch_col = frac_col;
      down.branch_val = 0.0;
      up.branch_val = 1.0;
      down.estimate = up.estimate = bound;
      down.depth = up.depth = node.depth + 1;
      down.basis = out_basis;
      up.basis = std::move(out_basis);

      int preferred, other;
      {
        arena.push_back(std::move(down));
        int down_id = static_cast<int>(arena.size()) - 1;
        arena.push_back(std::move(up));
        int up_id = static_cast<int>(arena.size()) - 1;
        preferred = up_first ? up_id : down_id;
        other = up_first ? down_id : up_id;
      }

      bool diving = from_dive || start_dive;
      if (diving) {
        open.push({arena[static_cast<std::size_t>(other)].estimate, other});
        dive_stack.push_back(preferred);
      } else {
        open.push({arena[static_cast<std::size_t>(other)].estimate, other});
        open.push({arena[static_cast<std::size_t>(preferred)].estimate, preferred});
      }
    }

    res.nodes_explored = nodes;
    res.wall_time = wall_clock_seconds() - t0;
    if (have_inc) {
      // Exhausting the tree proves the bound up to the pruning slack.
      if (open.empty() && dive_stack.empty() && !limit_hit)
        best_bound = std::max(best_bound, std::min(leaf_bound_min, inc_obj));
      best_bound = std::min(best_bound, inc_obj);
      res.has_incumbent = true;
      res.incumbent.status = LpStatus::Optimal;
      res.incumbent.values = inc_values;
      res.incumbent.objective = inc_obj;
      res.best_bound = best_bound;
      res.achieved_gap = std::max(0.0, detail::relative_gap_of(inc_obj, best_bound));
      res.status = (limit_hit && res.achieved_gap > opt_.relative_gap)
                       ? MipStatus::LimitReached
                       : MipStatus::OptimalWithinGap;
    } else {
      res.status = limit_hit ? MipStatus::LimitReached : MipStatus::Infeasible;
      res.best_bound = best_bound;
    }
    return res;
  }

 private:
  const ScucProblem& pr_;
  MipOptions opt_;
  SimplexSolver solver_;
  std::vector<int> binaries_;

  double prune_threshold(double inc) const {
    return inc - opt_.relative_gap * std::max(1e-10, std::abs(inc));
  }

  bool is_integral(const std::vector<double>& x) const {
    for (int j : binaries_) {
      double v = x[static_cast<std::size_t>(j)];
      if (std::abs(v - std::lround(v)) > opt_.integrality_tol) return false;
    }
    return true;
  }

  // Most fractional commit column; falls back to any fractional binary.
  int pick_branch_column(const std::vector<double>& x) const {
    int best = -1, best_any = -1;
    double score = -1.0, score_any = -1.0;
    for (int j : binaries_) {
      double v = x[static_cast<std::size_t>(j)];
      double frac = std::abs(v - std::lround(v));
      if (frac <= opt_.integrality_tol) continue;
      double s = 0.5 - std::abs(v - 0.5);
      if (pr_.vars[static_cast<std::size_t>(j)].kind == VarKind::Commit) {
        if (s > score) { score = s; best = j; }
      }
      if (s > score_any) { score_any = s; best_any = j; }
    }
    return best >= 0 ? best : best_any;
  }

  static void log_node(std::ostream& os, long long seq, int id, int depth, const LpSolution& rel,
                       bool have_inc, double inc) {
    os << "node " << seq << " id " << id << " depth " << depth << " status "
       << to_string(rel.status);
    if (rel.status == LpStatus::Optimal) os << " bound " << format_double(rel.objective);
    if (have_inc)
      os << " incumbent " << format_double(inc);
    else
      os << " incumbent -";
    os << "\n";
  }
};

inline MipResult solve_mip(const ScucProblem& pr, const MipOptions& opt = {},
                           const WarmStart* warm = nullptr) {
  MipSolver solver(pr, opt);
  return solver.solve(warm);
}

/// Pins every remaining commitment to the given 0/1 matrix and dispatches the
/// resulting pure LP. The start-up columns disappear through the implied-value
/// rule, so a fully covered problem has no binaries left.
inline LpSolution fix_and_solve(const ScucProblem& pr,
                                const std::vector<std::vector<int>>& commitment,
                                ScucProblem* reduced_out = nullptr) {
  if (static_cast<int>(commitment.size()) != pr.n_generators)
    throw DimensionMismatch("commitment matrix has wrong generator count");
  std::vector<CommitFix> fixes;
  for (int g = 0; g < pr.n_generators; ++g) {
    if (static_cast<int>(commitment[static_cast<std::size_t>(g)].size()) != pr.n_periods)
      throw DimensionMismatch("commitment matrix has wrong period count");
    for (int t = 0; t < pr.n_periods; ++t)
      fixes.push_back({g, t, commitment[static_cast<std::size_t>(g)][static_cast<std::size_t>(t)]});
  }
  ScucProblem red = apply_fixings(pr, fixes);
  if (red.lp.n_binary() != 0)
    throw ValidationError("commitment cover left " + std::to_string(red.lp.n_binary()) +
                          " binary variables free");
  auto sol = solve_lp(red.lp);
  if (reduced_out) *reduced_out = std::move(red);
  return sol;
}

}  // namespace uclab
