// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "uclab/common.hpp"

namespace uclab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense : uint8_t { LE, EQ };

struct RowTerm {
  int col = 0;
  double coef = 0.0;
};

/// One linear row: sum(terms) <= rhs or == rhs. Terms are kept sorted by
/// column and never carry zero coefficients.
struct LpRow {
  std::vector<RowTerm> terms;
  double rhs = 0.0;
  RowSense sense = RowSense::LE;
};

/// Minimization problem over bounded continuous variables, some of which may
/// be flagged integral in [0,1].
struct LpProblem {
  int n_cols = 0;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<uint8_t> is_binary;
  std::vector<LpRow> rows;
  double objective_offset = 0.0;
  // Set when constant folding has already proven the problem infeasible.
  bool trivially_infeasible = false;

  int add_col(double c, double lo, double hi, bool binary = false) {
    cost.push_back(c);
    lower.push_back(lo);
    upper.push_back(hi);
    is_binary.push_back(binary ? 1 : 0);
    return n_cols++;
  }

  LpRow& add_row(RowSense sense, double rhs) {
    rows.emplace_back();
    rows.back().sense = sense;
    rows.back().rhs = rhs;
    return rows.back();
  }

  int n_rows() const { return static_cast<int>(rows.size()); }

  int n_binary() const {
    int k = 0;
    for (uint8_t b : is_binary) k += b;
    return k;
  }
};

inline void append_term(LpRow& row, int col, double coef) {
  if (coef == 0.0) return;
  row.terms.push_back({col, coef});
}

struct FeasibilityReport {
  double max_row_violation = 0.0;
  double max_bound_violation = 0.0;
  bool ok(double tol_row = 1e-6, double tol_bound = 1e-9) const {
    return max_row_violation <= tol_row && max_bound_violation <= tol_bound;
  }
};

/// Checks a candidate point against all rows and bounds.
inline FeasibilityReport check_point(const LpProblem& lp, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != lp.n_cols)
    throw DimensionMismatch("point has " + std::to_string(x.size()) + " entries, problem has " +
                            std::to_string(lp.n_cols) + " columns");
  FeasibilityReport rep;
  for (int j = 0; j < lp.n_cols; ++j) {
    double below = lp.lower[j] - x[j];
    double above = x[j] - lp.upper[j];
    rep.max_bound_violation = std::max(rep.max_bound_violation, std::max(below, above));
  }
  for (const auto& row : lp.rows) {
    double act = 0.0;
    for (const auto& t : row.terms) act += t.coef * x[static_cast<std::size_t>(t.col)];
    double viol = (row.sense == RowSense::LE) ? (act - row.rhs) : std::abs(act - row.rhs);
    rep.max_row_violation = std::max(rep.max_row_violation, viol);
  }
  rep.max_bound_violation = std::max(rep.max_bound_violation, 0.0);
  return rep;
}

inline double objective_value(const LpProblem& lp, const std::vector<double>& x) {
  double obj = lp.objective_offset;
  for (int j = 0; j < lp.n_cols; ++j) obj += lp.cost[j] * x[static_cast<std::size_t>(j)];
  return obj;
}

}  // namespace uclab
