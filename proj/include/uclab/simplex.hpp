// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "uclab/common.hpp"
#include "uclab/lp.hpp"

namespace uclab {

enum class LpStatus : uint8_t { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    default: return "unbounded";
  }
}

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> values;  // structural columns only
  double objective = 0.0;      // includes any constant offset
  int iterations = 0;
};

/// Column states snapshotted for warm starts. One entry per column including
/// the per-row logical columns appended after the structural ones.
struct SimplexBasis {
  enum : uint8_t { AtLower = 0, AtUpper = 1, Basic = 2, Free = 3 };
  std::vector<uint8_t> vstat;
  bool empty() const { return vstat.empty(); }
};

struct SimplexOptions {
  double tol_bound = 1e-9;    // bound feasibility
  double tol_row = 1e-6;      // row activity feasibility (final acceptance)
  double tol_dj = 1e-9;       // pricing threshold on reduced costs
  double tol_pivot = 1e-11;   // below this a pivot is numerically void
  double tol_ratio = 1e-9;    // ratio-test participation threshold
  int refactor_interval = 64; // eta updates between refactorizations
  int max_iterations = 0;     // 0 = choose from problem size
};

// ---------------------------------------------------------------------------
// Bounded-variable revised primal simplex.
//
// Every row gets one logical column so the working system is A x + s = b.
// Logical bounds encode the row sense: [0, inf) for LE rows, [0, 0] for EQ
// rows. Feasibility is restored by a composite phase that walks the
// piecewise-linear sum of bound violations through multiple ratio-test
// breakpoints per iteration. The basis inverse is kept as a sparse LU of the
// basis matrix plus a product-form eta queue.
// ---------------------------------------------------------------------------
class SimplexSolver {
 public:
  SimplexSolver(const LpProblem& lp, SimplexOptions opt = {})
      : opt_(opt),
        n_(lp.n_cols),
        m_(lp.n_rows()),
        N_(lp.n_cols + lp.n_rows()),
        offset_(lp.objective_offset),
        trivially_infeasible_(lp.trivially_infeasible) {
    cost_.assign(static_cast<std::size_t>(N_), 0.0);
    lo_.assign(static_cast<std::size_t>(N_), 0.0);
    hi_.assign(static_cast<std::size_t>(N_), 0.0);
    for (int j = 0; j < n_; ++j) {
      cost_[static_cast<std::size_t>(j)] = lp.cost[static_cast<std::size_t>(j)];
      lo_[static_cast<std::size_t>(j)] = lp.lower[static_cast<std::size_t>(j)];
      hi_[static_cast<std::size_t>(j)] = lp.upper[static_cast<std::size_t>(j)];
      if (lo_[static_cast<std::size_t>(j)] > hi_[static_cast<std::size_t>(j)] + opt_.tol_bound)
        trivially_infeasible_ = true;
    }
    base_infeasible_ = lp.trivially_infeasible;
    cols_.resize(static_cast<std::size_t>(N_));
    rhs_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int i = 0; i < m_; ++i) {
      const LpRow& row = lp.rows[static_cast<std::size_t>(i)];
      rhs_[static_cast<std::size_t>(i)] = row.rhs;
      for (const auto& t : row.terms)
        cols_[static_cast<std::size_t>(t.col)].push_back({i, t.coef});
      int s = n_ + i;
      cols_[static_cast<std::size_t>(s)].push_back({i, 1.0});
      lo_[static_cast<std::size_t>(s)] = 0.0;
      hi_[static_cast<std::size_t>(s)] = (row.sense == RowSense::LE) ? kInf : 0.0;
    }
    if (opt_.max_iterations <= 0) opt_.max_iterations = 20000 + 60 * (m_ + n_);
  }

  /// Re-solves with replacement bounds on the structural columns, reusing the
  /// constraint structure. Used heavily by branch-and-bound node solves.
  LpSolution solve_bounded(const std::vector<double>& lower, const std::vector<double>& upper,
                           const SimplexBasis* warm = nullptr,
                           SimplexBasis* basis_out = nullptr) {
    if (static_cast<int>(lower.size()) != n_ || static_cast<int>(upper.size()) != n_)
      throw DimensionMismatch("bound override length does not match column count");
    trivially_infeasible_ = base_infeasible_;
    for (int j = 0; j < n_; ++j) {
      lo_[static_cast<std::size_t>(j)] = lower[static_cast<std::size_t>(j)];
      hi_[static_cast<std::size_t>(j)] = upper[static_cast<std::size_t>(j)];
      if (lower[static_cast<std::size_t>(j)] > upper[static_cast<std::size_t>(j)] + opt_.tol_bound)
        trivially_infeasible_ = true;
    }
    return solve(warm, basis_out);
  }

  LpSolution solve(const SimplexBasis* warm = nullptr, SimplexBasis* basis_out = nullptr) {
    LpSolution sol;
    if (trivially_infeasible_) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    init_basis(warm);
    refactorize();

    bool bland = false;
    bool accept_near = false;  // set when residual violations are below the row tolerance
    int last_progress = 0;
    double last_metric = kInf;
    int iter = 0;
    for (; iter < opt_.max_iterations; ++iter) {
      if (static_cast<int>(etas_.size()) >= opt_.refactor_interval) refactorize();

      double infeas = total_infeasibility();
      bool phase1 = !accept_near && infeas > phase1_exit_tol();

      // Progress tracking drives the anti-cycling fallback: once the metric
      // stalls for long enough, pricing degrades to lowest-index.
      double metric = phase1 ? infeas : current_objective();
      if (metric < last_metric - 1e-12) {
        last_metric = metric;
        last_progress = iter;
        bland = false;
      } else if (iter - last_progress > 400) {
        bland = true;
      }

      btran_costs(phase1);
      int q = -1;
      int sigma = 0;
      price(phase1, bland, q, sigma);
      if (q < 0) {
        if (phase1) {
          // No improving feasibility direction. Violations within the row
          // tolerance are acceptable; switch to cost optimization.
          if (max_bound_violation() <= opt_.tol_row) {
            accept_near = true;
            continue;
          }
          sol.status = LpStatus::Infeasible;
          sol.iterations = iter;
          if (basis_out) *basis_out = snapshot();
          return sol;
        }
        break;  // optimal
      }

      ftran_column(q);
      bool moved = phase1 ? step_phase1(q, sigma) : step_phase2(q, sigma, bland);
      if (!moved) {
        if (!phase1) {
          sol.status = LpStatus::Unbounded;
          sol.iterations = iter;
          if (basis_out) *basis_out = snapshot();
          return sol;
        }
        // A stalled composite step is numerical: retry once from a fresh
        // factorization, then give up.
        if (!retried_) {
          retried_ = true;
          refactorize();
          continue;
        }
        throw NumericalError("composite phase stalled without an improving step");
      }
      retried_ = false;
    }
    if (iter >= opt_.max_iterations)
      throw NumericalError("simplex iteration limit reached (" +
                           std::to_string(opt_.max_iterations) + ")");

    // Clean copy of the point: refactorize and recompute basic values so the
    // reported solution does not carry eta-queue drift.
    refactorize();
    if (total_infeasibility() > phase1_exit_tol() && max_bound_violation() > opt_.tol_row) {
      sol.status = LpStatus::Infeasible;
      sol.iterations = iter;
      if (basis_out) *basis_out = snapshot();
      return sol;
    }

    sol.status = LpStatus::Optimal;
    sol.iterations = iter;
    sol.values.assign(static_cast<std::size_t>(n_), 0.0);
    for (int j = 0; j < n_; ++j) {
      double v = column_value(j);
      // Snap within-tolerance values onto their bounds.
      if (std::isfinite(lo_[static_cast<std::size_t>(j)]) &&
          std::abs(v - lo_[static_cast<std::size_t>(j)]) <= 1e-7)
        v = lo_[static_cast<std::size_t>(j)];
      else if (std::isfinite(hi_[static_cast<std::size_t>(j)]) &&
               std::abs(v - hi_[static_cast<std::size_t>(j)]) <= 1e-7)
        v = hi_[static_cast<std::size_t>(j)];
      sol.values[static_cast<std::size_t>(j)] = v;
    }
    sol.objective = offset_;
    for (int j = 0; j < n_; ++j)
      sol.objective += cost_[static_cast<std::size_t>(j)] * sol.values[static_cast<std::size_t>(j)];
    if (basis_out) *basis_out = snapshot();
    return sol;
  }

 private:
  struct Eta {
    int pivot_row = 0;
    double pivot_val = 0.0;
    std::vector<std::pair<int, double>> terms;  // excludes the pivot entry
  };

  SimplexOptions opt_;
  int n_, m_, N_;
  double offset_;
  bool trivially_infeasible_ = false;
  bool base_infeasible_ = false;
  bool retried_ = false;

  std::vector<std::vector<RowTerm>> cols_;  // column-wise [A | I]
  std::vector<double> cost_, lo_, hi_, rhs_;

  std::vector<int> basic_;         // column occupying each basis position
  std::vector<int> pos_;           // column -> basis position, -1 if nonbasic
  std::vector<uint8_t> vstat_;     // SimplexBasis states
  std::vector<double> nb_value_;   // value of each nonbasic column
  Eigen::VectorXd xB_;             // basic values by position

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
  Eigen::VectorXd work_y_;   // BTRAN result
  Eigen::VectorXd work_w_;   // FTRAN result

  double phase1_exit_tol() const { return opt_.tol_bound * static_cast<double>(std::max(1, m_)); }

  double column_value(int j) const {
    int p = pos_[static_cast<std::size_t>(j)];
    return p >= 0 ? xB_[p] : nb_value_[static_cast<std::size_t>(j)];
  }

  double nonbasic_start_value(int j) const {
    double lo = lo_[static_cast<std::size_t>(j)], hi = hi_[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) return lo;
    if (std::isfinite(hi)) return hi;
    return 0.0;
  }

  uint8_t nonbasic_start_stat(int j) const {
    double lo = lo_[static_cast<std::size_t>(j)], hi = hi_[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) return SimplexBasis::AtLower;
    if (std::isfinite(hi)) return SimplexBasis::AtUpper;
    return SimplexBasis::Free;
  }

  void init_basis(const SimplexBasis* warm) {
    basic_.clear();
    pos_.assign(static_cast<std::size_t>(N_), -1);
    vstat_.assign(static_cast<std::size_t>(N_), SimplexBasis::AtLower);
    nb_value_.assign(static_cast<std::size_t>(N_), 0.0);
    bool used_warm = false;
    if (warm && static_cast<int>(warm->vstat.size()) == N_) {
      std::vector<int> basics;
      for (int j = 0; j < N_; ++j)
        if (warm->vstat[static_cast<std::size_t>(j)] == SimplexBasis::Basic) basics.push_back(j);
      if (static_cast<int>(basics.size()) == m_) {
        basic_ = basics;
        for (int p = 0; p < m_; ++p) pos_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])] = p;
        for (int j = 0; j < N_; ++j) {
          if (pos_[static_cast<std::size_t>(j)] >= 0) {
            vstat_[static_cast<std::size_t>(j)] = SimplexBasis::Basic;
            continue;
          }
          uint8_t st = warm->vstat[static_cast<std::size_t>(j)];
          double lo = lo_[static_cast<std::size_t>(j)], hi = hi_[static_cast<std::size_t>(j)];
          // Bounds may have changed since the snapshot; clamp to what exists.
          if (st == SimplexBasis::AtUpper && std::isfinite(hi)) {
            vstat_[static_cast<std::size_t>(j)] = SimplexBasis::AtUpper;
            nb_value_[static_cast<std::size_t>(j)] = hi;
          } else if (st == SimplexBasis::Free && !std::isfinite(lo) && !std::isfinite(hi)) {
            vstat_[static_cast<std::size_t>(j)] = SimplexBasis::Free;
            nb_value_[static_cast<std::size_t>(j)] = 0.0;
          } else {
            vstat_[static_cast<std::size_t>(j)] = nonbasic_start_stat(j);
            nb_value_[static_cast<std::size_t>(j)] = nonbasic_start_value(j);
          }
        }
        used_warm = true;
      }
    }
    if (!used_warm) {
      basic_.resize(static_cast<std::size_t>(m_));
      for (int i = 0; i < m_; ++i) {
        basic_[static_cast<std::size_t>(i)] = n_ + i;
        pos_[static_cast<std::size_t>(n_ + i)] = i;
        vstat_[static_cast<std::size_t>(n_ + i)] = SimplexBasis::Basic;
      }
      for (int j = 0; j < n_; ++j) {
        vstat_[static_cast<std::size_t>(j)] = nonbasic_start_stat(j);
        nb_value_[static_cast<std::size_t>(j)] = nonbasic_start_value(j);
      }
    }
    xB_.setZero(m_);
  }

  SimplexBasis snapshot() const {
    SimplexBasis b;
    b.vstat = vstat_;
    return b;
  }

  void refactorize() {
    etas_.clear();
    if (m_ == 0) {
      recompute_basics();
      return;
    }
    Eigen::SparseMatrix<double> B(m_, m_);
    std::vector<Eigen::Triplet<double>> trips;
    for (int p = 0; p < m_; ++p)
      for (const auto& t : cols_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(p)])])
        trips.emplace_back(t.col, p, t.coef);
    B.setFromTriplets(trips.begin(), trips.end());
    lu_.analyzePattern(B);
    lu_.factorize(B);
    if (lu_.info() != Eigen::Success) {
      // Singular basis (possible with a stale warm start): rebuild from
      // logicals and retry once.
      bool all_logical = true;
      for (int p = 0; p < m_; ++p)
        if (basic_[static_cast<std::size_t>(p)] < n_) { all_logical = false; break; }
      if (all_logical) throw NumericalError("basis factorization failed");
      init_basis(nullptr);
      refactorize();
      return;
    }
    recompute_basics();
  }

  void recompute_basics() {
    Eigen::VectorXd rhs(m_);
    for (int i = 0; i < m_; ++i) rhs[i] = rhs_[static_cast<std::size_t>(i)];
    for (int j = 0; j < N_; ++j) {
      if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
      double v = nb_value_[static_cast<std::size_t>(j)];
      if (v == 0.0) continue;
      for (const auto& t : cols_[static_cast<std::size_t>(j)]) rhs[t.col] -= t.coef * v;
    }
    xB_ = (m_ > 0) ? ftran(rhs) : rhs;
  }

  Eigen::VectorXd ftran(const Eigen::VectorXd& v) const {
    Eigen::VectorXd x = lu_.solve(v);
    for (const Eta& e : etas_) {
      double t = x[e.pivot_row] / e.pivot_val;
      x[e.pivot_row] = t;
      if (t != 0.0)
        for (const auto& [i, val] : e.terms) x[i] -= val * t;
    }
    return x;
  }

  Eigen::VectorXd btran(const Eigen::VectorXd& v) {
    Eigen::VectorXd y = v;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = 0.0;
      for (const auto& [i, val] : it->terms) s += val * y[i];
      y[it->pivot_row] = (y[it->pivot_row] - s) / it->pivot_val;
    }
    return lu_.adjoint().solve(y);
  }

  double total_infeasibility() const {
    double s = 0.0;
    for (int p = 0; p < m_; ++p) {
      int j = basic_[static_cast<std::size_t>(p)];
      double x = xB_[p];
      double lo = lo_[static_cast<std::size_t>(j)], hi = hi_[static_cast<std::size_t>(j)];
      if (x < lo) s += lo - x;
      if (x > hi) s += x - hi;
    }
    return s;
  }

  double max_bound_violation() const {
    double s = 0.0;
    for (int p = 0; p < m_; ++p) {
      int j = basic_[static_cast<std::size_t>(p)];
      double x = xB_[p];
      s = std::max(s, lo_[static_cast<std::size_t>(j)] - x);
      s = std::max(s, x - hi_[static_cast<std::size_t>(j)]);
    }
    return std::max(s, 0.0);
  }

  double current_objective() const {
    double obj = offset_;
    for (int j = 0; j < N_; ++j) {
      double c = cost_[static_cast<std::size_t>(j)];
      if (c != 0.0) obj += c * column_value(j);
    }
    return obj;
  }

  void btran_costs(bool phase1) {
    if (m_ == 0) {
      work_y_.resize(0);
      return;
    }
    Eigen::VectorXd cB(m_);
    for (int p = 0; p < m_; ++p) {
      int j = basic_[static_cast<std::size_t>(p)];
      if (phase1) {
        double x = xB_[p];
        double lo = lo_[static_cast<std::size_t>(j)], hi = hi_[static_cast<std::size_t>(j)];
        cB[p] = (x < lo - opt_.tol_bound) ? -1.0 : (x > hi + opt_.tol_bound) ? 1.0 : 0.0;
      } else {
        cB[p] = cost_[static_cast<std::size_t>(j)];
      }
    }
    work_y_ = btran(cB);
  }

  double reduced_cost(int j, bool phase1) const {
    double d = phase1 ? 0.0 : cost_[static_cast<std::size_t>(j)];
    for (const auto& t : cols_[static_cast<std::size_t>(j)]) d -= work_y_[t.col] * t.coef;
    return d;
  }

  // Chooses the entering column and its direction of motion. Largest
  // improving reduced cost wins; ties and the anti-cycling fallback go to the
  // lowest column index.
  void price(bool phase1, bool bland, int& q_out, int& sigma_out) {
    q_out = -1;
    sigma_out = 0;
    double best = opt_.tol_dj;
    for (int j = 0; j < N_; ++j) {
      uint8_t st = vstat_[static_cast<std::size_t>(j)];
      if (st == SimplexBasis::Basic) continue;
      if (lo_[static_cast<std::size_t>(j)] == hi_[static_cast<std::size_t>(j)]) continue;
      double d = reduced_cost(j, phase1);
      int sigma = 0;
      if (st == SimplexBasis::AtLower && d < -opt_.tol_dj) sigma = 1;
      else if (st == SimplexBasis::AtUpper && d > opt_.tol_dj) sigma = -1;
      else if (st == SimplexBasis::Free && std::abs(d) > opt_.tol_dj) sigma = d < 0 ? 1 : -1;
      if (sigma == 0) continue;
      if (bland) {
        q_out = j;
        sigma_out = sigma;
        return;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        q_out = j;
        sigma_out = sigma;
      }
    }
  }

  void ftran_column(int q) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m_);
    for (const auto& t : cols_[static_cast<std::size_t>(q)]) a[t.col] = t.coef;
    work_w_ = (m_ > 0) ? ftran(a) : a;
  }

  // Executes the basis change for entering column q leaving position r, where
  // the entering column's value moves to `enter_value` and the displaced
  // column settles on `leave_stat`.
  void pivot(int q, int r, double enter_value, uint8_t leave_stat) {
    double piv = work_w_[r];
    if (std::abs(piv) < opt_.tol_pivot)
      throw NumericalError("pivot magnitude " + format_double(std::abs(piv)) +
                           " below hard threshold");
    int leaving = basic_[static_cast<std::size_t>(r)];
    double leave_value = (leave_stat == SimplexBasis::AtUpper)
                             ? hi_[static_cast<std::size_t>(leaving)]
                             : lo_[static_cast<std::size_t>(leaving)];
    vstat_[static_cast<std::size_t>(leaving)] = leave_stat;
    nb_value_[static_cast<std::size_t>(leaving)] = leave_value;
    pos_[static_cast<std::size_t>(leaving)] = -1;

    basic_[static_cast<std::size_t>(r)] = q;
    pos_[static_cast<std::size_t>(q)] = r;
    vstat_[static_cast<std::size_t>(q)] = SimplexBasis::Basic;
    xB_[r] = enter_value;

    Eta e;
    e.pivot_row = r;
    e.pivot_val = piv;
    for (int i = 0; i < m_; ++i)
      if (i != r && work_w_[i] != 0.0) e.terms.emplace_back(i, work_w_[i]);
    etas_.push_back(std::move(e));
  }

  // Phase-2 ratio test and update. Returns false only on an unbounded ray.
  bool step_phase2(int q, int sigma, bool bland) {
    double dir = static_cast<double>(sigma);
    double limit = kInf;
    int r = -1;
    uint8_t leave_stat = SimplexBasis::AtLower;
    double best_piv = 0.0;
    for (int p = 0; p < m_; ++p) {
      double rho = dir * work_w_[p];
      if (std::abs(rho) <= opt_.tol_ratio) continue;
      int j = basic_[static_cast<std::size_t>(p)];
      double x = xB_[p];
      double t, bound;
      uint8_t stat;
      if (rho > 0.0) {  // basic decreases toward its lower bound
        bound = lo_[static_cast<std::size_t>(j)];
        if (!std::isfinite(bound)) continue;
        t = (x - bound) / rho;
        stat = SimplexBasis::AtLower;
      } else {  // basic increases toward its upper bound
        bound = hi_[static_cast<std::size_t>(j)];
        if (!std::isfinite(bound)) continue;
        t = (x - bound) / rho;
        stat = SimplexBasis::AtUpper;
      }
      if (t < 0.0) t = 0.0;  // basic already marginally past its bound
      bool better;
      if (r < 0 || t < limit - 1e-12) {
        better = true;
      } else if (t < limit + 1e-12) {
        better = bland ? basic_[static_cast<std::size_t>(p)] < basic_[static_cast<std::size_t>(r)]
                       : std::abs(work_w_[p]) > std::abs(best_piv);
      } else {
        better = false;
      }
      if (better) {
        limit = t;
        r = p;
        leave_stat = stat;
        best_piv = work_w_[p];
      }
    }
    double range = hi_[static_cast<std::size_t>(q)] - lo_[static_cast<std::size_t>(q)];
    bool flip = false;
    if (std::isfinite(range) && range <= limit) {
      limit = range;
      flip = true;
    }
    if (!std::isfinite(limit)) return false;  // unbounded

    double start = nb_value_[static_cast<std::size_t>(q)];
    for (int p = 0; p < m_; ++p) xB_[p] -= limit * dir * work_w_[p];
    if (flip) {
      nb_value_[static_cast<std::size_t>(q)] = start + dir * limit;
      vstat_[static_cast<std::size_t>(q)] =
          sigma > 0 ? SimplexBasis::AtUpper : SimplexBasis::AtLower;
    } else {
      pivot(q, r, start + dir * limit, leave_stat);
    }
    return true;
  }

  // Composite feasibility step: walks breakpoints while the violation sum
  // still decreases. Returns false when no finite step exists.
  bool step_phase1(int q, int sigma) {
    double dir = static_cast<double>(sigma);
    double d_q = reduced_cost(q, true);
    double slope = dir * d_q;  // negative by construction

    struct Breakpoint {
      double t;
      int p;           // basis position, -1 for the entering column's own range
      uint8_t stat;    // status the leaving column would take
    };
    std::vector<Breakpoint> bps;
    for (int p = 0; p < m_; ++p) {
      double rho = dir * work_w_[p];
      if (std::abs(rho) <= opt_.tol_ratio) continue;
      int j = basic_[static_cast<std::size_t>(p)];
      double x = xB_[p];
      double lo = lo_[static_cast<std::size_t>(j)], hi = hi_[static_cast<std::size_t>(j)];
      if (rho > 0.0) {  // decreasing: may cross hi (if above) then lo
        if (x > hi + opt_.tol_bound && std::isfinite(hi))
          bps.push_back({(x - hi) / rho, p, SimplexBasis::AtUpper});
        if (std::isfinite(lo) && x >= lo - opt_.tol_bound)
          bps.push_back({std::max(0.0, (x - lo) / rho), p, SimplexBasis::AtLower});
      } else {  // increasing: may cross lo (if below) then hi
        if (x < lo - opt_.tol_bound && std::isfinite(lo))
          bps.push_back({(lo - x) / (-rho), p, SimplexBasis::AtLower});
        if (std::isfinite(hi) && x <= hi + opt_.tol_bound)
          bps.push_back({std::max(0.0, (hi - x) / (-rho)), p, SimplexBasis::AtUpper});
      }
    }
    double range = hi_[static_cast<std::size_t>(q)] - lo_[static_cast<std::size_t>(q)];
    if (std::isfinite(range)) bps.push_back({range, -1, 0});

    std::sort(bps.begin(), bps.end(), [](const Breakpoint& a, const Breakpoint& b) {
      if (a.t != b.t) return a.t < b.t;
      return a.p < b.p;
    });

    double t_star = -1.0;
    int r = -1;
    uint8_t leave_stat = SimplexBasis::AtLower;
    bool flip = false;
    for (const Breakpoint& bp : bps) {
      if (bp.p < 0) {  // entering column reaches its opposite bound
        t_star = bp.t;
        flip = true;
        break;
      }
      slope += std::abs(work_w_[bp.p]);
      if (slope >= -1e-12) {
        t_star = bp.t;
        r = bp.p;
        leave_stat = bp.stat;
        break;
      }
    }
    if (t_star < 0.0) return false;  // slope stayed negative past every breakpoint

    double start = nb_value_[static_cast<std::size_t>(q)];
    for (int p = 0; p < m_; ++p) xB_[p] -= t_star * dir * work_w_[p];
    if (flip) {
      nb_value_[static_cast<std::size_t>(q)] = start + dir * t_star;
      vstat_[static_cast<std::size_t>(q)] =
          sigma > 0 ? SimplexBasis::AtUpper : SimplexBasis::AtLower;
    } else {
      pivot(q, r, start + dir * t_star, leave_stat);
    }
    return true;
  }
};

/// One-call interface used by everything above the LP layer.
inline LpSolution solve_lp(const LpProblem& lp, const SimplexOptions& opt = {},
                           const SimplexBasis* warm = nullptr,
                           SimplexBasis* basis_out = nullptr) {
  SimplexSolver solver(lp, opt);
  return solver.solve(warm, basis_out);
}

}  // namespace uclab
