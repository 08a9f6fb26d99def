// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uclab/datagen.hpp"
#include "uclab/grid.hpp"

namespace uclab {

struct LrConfig {
  double penalty = 1.0;  // C in the loss; larger fits harder
  double tol = 1e-6;     // max gradient component at exit
  int max_iter = 1000;   // coordinate sweeps
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Feature pipeline: flatten bus-major period-minor, then min-max scale with
// bounds fitted on the training split only. Test values may leave [0,1];
// they are never clipped.
// ---------------------------------------------------------------------------
struct FeatureScaler {
  std::vector<double> mins, maxs;

  bool fitted() const { return !mins.empty(); }

  void fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("cannot fit a scaler on zero rows");
    std::size_t d = rows[0].size();
    mins.assign(d, kInf);
    maxs.assign(d, -kInf);
    for (const auto& row : rows) {
      if (row.size() != d) throw DimensionMismatch("ragged feature rows");
      for (std::size_t j = 0; j < d; ++j) {
        mins[j] = std::min(mins[j], row[j]);
        maxs[j] = std::max(maxs[j], row[j]);
      }
    }
  }

  std::vector<double> transform(const std::vector<double>& row) const {
    if (!fitted()) throw ValidationError("scaler not fitted");
    if (row.size() != mins.size())
      throw DimensionMismatch("feature row length " + std::to_string(row.size()) +
                              " does not match scaler width " + std::to_string(mins.size()));
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      double span = maxs[j] - mins[j];
      out[j] = span > 0.0 ? (row[j] - mins[j]) / span : 0.0;
    }
    return out;
  }
};

inline std::vector<double> flatten_demand(const DemandProfile& demand) {
  std::vector<double> flat;
  for (const auto& row : demand.values) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

inline std::vector<double> featurize(const DemandProfile& demand, const FeatureScaler& scaler) {
  return scaler.transform(flatten_demand(demand));
}

// ---------------------------------------------------------------------------
// One binary classifier per (generator, period) target.
// ---------------------------------------------------------------------------
struct LrTargetModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double penalty = 1.0;
  int constant_class = -1;  // -1 trained; 0/1 single-class shortcut

  double predict_proba(const std::vector<double>& x) const {
    if (constant_class >= 0) return static_cast<double>(constant_class);
    if (x.size() != weights.size())
      throw DimensionMismatch("feature length does not match model width");
    double z = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
    return sigmoid(z);
  }

  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
  }
};

inline double log1p_exp(double s) {  // log(1 + e^s) without overflow
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_c = 0.0;
};

/// L2-regularized logistic loss over labels {0,1} mapped to {-1,+1}:
///   0.5 w'w + C sum_i log(1 + exp(-y_i (x_i'w + c))), intercept unpenalized.
inline LossGrad loss_and_gradient(const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, double C,
                                  const std::vector<double>& w, double c) {
  if (X.size() != y.size()) throw DimensionMismatch("feature and label counts differ");
  LossGrad out;
  out.grad_w.assign(w.size(), 0.0);
  for (double wj : w) out.loss += 0.5 * wj * wj;
  for (std::size_t j = 0; j < w.size(); ++j) out.grad_w[j] = w[j];
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].size() != w.size()) throw DimensionMismatch("ragged feature rows");
    double yi = y[i] ? 1.0 : -1.0;
    double z = c;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * X[i][j];
    double margin = -yi * z;
    out.loss += C * log1p_exp(margin);
    double slope = -yi * LrTargetModel::sigmoid(margin);  // d loss_i / d z
    for (std::size_t j = 0; j < w.size(); ++j) out.grad_w[j] += C * slope * X[i][j];
    out.grad_c += C * slope;
  }
  if (!std::isfinite(out.loss)) throw NonFiniteError("logistic loss is not finite");
  return out;
}

/// Cyclic coordinate descent with exact 1-D Newton steps and a halving
/// safeguard. Deterministic from the zero start. Single-class labels skip
/// the optimizer entirely.
inline LrTargetModel train_target(const std::vector<std::vector<double>>& X,
                                  const std::vector<int>& y, const LrConfig& cfg,
                                  std::vector<double>* loss_trace = nullptr) {
  if (X.empty() || X.size() != y.size())
    throw DimensionMismatch("need matching, nonempty features and labels");
  for (int label : y)
    if (label != 0 && label != 1) throw ValidationError("labels must be 0 or 1");

  LrTargetModel model;
  model.penalty = cfg.penalty;
  std::size_t d = X[0].size();
  model.weights.assign(d, 0.0);

  bool any0 = false, any1 = false;
  for (int label : y) (label ? any1 : any0) = true;
  if (!any0 || !any1) {
    model.constant_class = any1 ? 1 : 0;
    return model;
  }

  std::size_t m = X.size();
  std::vector<double> z(m, 0.0);  // margins x_i'w + c
  std::vector<double> ytilde(m);
  for (std::size_t i = 0; i < m; ++i) ytilde[i] = y[i] ? 1.0 : -1.0;

  auto total_loss = [&]() {
    double loss = 0.0;
    for (double wj : model.weights) loss += 0.5 * wj * wj;
    for (std::size_t i = 0; i < m; ++i) loss += cfg.penalty * log1p_exp(-ytilde[i] * z[i]);
    if (!std::isfinite(loss)) throw NonFiniteError("logistic loss is not finite");
    return loss;
  };

  double loss = total_loss();
  if (loss_trace) loss_trace->push_back(loss);

  // One coordinate: minimize along w_j (or the intercept when j == d).
  auto descend = [&](std::size_t j) {
    bool is_w = j < d;
    double g = is_w ? model.weights[j] : 0.0;
    double h = is_w ? 1.0 : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double xij = is_w ? X[i][j] : 1.0;
      if (xij == 0.0) continue;
      double s = LrTargetModel::sigmoid(-ytilde[i] * z[i]);
      g += cfg.penalty * (-ytilde[i] * s) * xij;
      h += cfg.penalty * s * (1.0 - s) * xij * xij;
    }
    if (std::abs(g) < 1e-15 || h < 1e-12) return;
    double step = -g / h;
    for (int halvings = 0; halvings < 40; ++halvings) {
      double& coord = is_w ? model.weights[j] : model.intercept;
      double saved = coord;
      coord += step;
      for (std::size_t i = 0; i < m; ++i)
        z[i] += step * (is_w ? X[i][j] : 1.0);
      double trial = total_loss();
      if (trial <= loss + 1e-12) {
        loss = trial;
        return;
      }
      coord = saved;  // roll back and retry shorter
      for (std::size_t i = 0; i < m; ++i)
        z[i] -= step * (is_w ? X[i][j] : 1.0);
      step *= 0.5;
    }
  };

  for (int sweep = 0; sweep < cfg.max_iter; ++sweep) {
    for (std::size_t j = 0; j <= d; ++j) descend(j);
    if (loss_trace) loss_trace->push_back(loss);

    double worst = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double g = model.weights[j];
      for (std::size_t i = 0; i < m; ++i)
        g += cfg.penalty * (-ytilde[i] * LrTargetModel::sigmoid(-ytilde[i] * z[i])) * X[i][j];
      worst = std::max(worst, std::abs(g));
    }
    double gc = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      gc += cfg.penalty * (-ytilde[i] * LrTargetModel::sigmoid(-ytilde[i] * z[i]));
    worst = std::max(worst, std::abs(gc));
    if (worst <= cfg.tol) break;
  }
  for (double wj : model.weights)
    if (!std::isfinite(wj)) throw NonFiniteError("weights diverged");
  if (!std::isfinite(model.intercept)) throw NonFiniteError("intercept diverged");
  return model;
}

// ---------------------------------------------------------------------------
// Ensemble: one model per (generator, period), shared scaler and threshold.
// ---------------------------------------------------------------------------
struct LrEnsemble {
  int n_generators = 0;
  int n_periods = 0;
  int n_buses = 0;
  std::vector<std::vector<LrTargetModel>> models;  // [g][t]
  FeatureScaler scaler;
  double threshold = 0.5;
  LrConfig config;
  std::string system_hash;
  double train_seconds = 0.0;  // bookkeeping only, never serialized
};

struct PredictionSet {
  std::vector<std::vector<double>> probabilities;  // [g][t]
  std::vector<std::vector<int>> classified;        // 1 iff proba >= threshold
};

inline PredictionSet predict(const LrEnsemble& ens, const DemandProfile& demand) {
  auto x = featurize(demand, ens.scaler);
  PredictionSet out;
  auto ng = static_cast<std::size_t>(ens.n_generators);
  auto nt = static_cast<std::size_t>(ens.n_periods);
  out.probabilities.assign(ng, std::vector<double>(nt, 0.0));
  out.classified.assign(ng, std::vector<int>(nt, 0));
  for (std::size_t g = 0; g < ng; ++g)
    for (std::size_t t = 0; t < nt; ++t) {
      double p = ens.models[g][t].predict_proba(x);
      out.probabilities[g][t] = p;
      out.classified[g][t] = p >= ens.threshold ? 1 : 0;
    }
  return out;
}

inline LrEnsemble train_ensemble(const Dataset& ds, const LrConfig& cfg = {}) {
  if (!ds.has_split) throw ValidationError("dataset has no train/test split");
  if (ds.split.train_ids.empty()) throw TooFewSamples("empty training split");
  double t0 = wall_clock_seconds();

  auto train = select_samples(ds, ds.split.train_ids);
  LrEnsemble ens;
  ens.config = cfg;
  ens.system_hash = ds.system_hash;
  ens.n_generators = static_cast<int>(train[0]->commitment.size());
  ens.n_periods = static_cast<int>(train[0]->commitment[0].size());
  ens.n_buses = static_cast<int>(train[0]->demand.values.size());

  std::vector<std::vector<double>> raw;
  raw.reserve(train.size());
  for (const Sample* s : train) raw.push_back(flatten_demand(s->demand));
  ens.scaler.fit(raw);
  std::vector<std::vector<double>> X;
  X.reserve(raw.size());
  for (const auto& row : raw) X.push_back(ens.scaler.transform(row));

  auto ng = static_cast<std::size_t>(ens.n_generators);
  auto nt = static_cast<std::size_t>(ens.n_periods);
  ens.models.assign(ng, std::vector<LrTargetModel>(nt));
  int n_targets = ens.n_generators * ens.n_periods;
  parallel_for(n_targets, worker_count(), [&](int k) {
    auto g = static_cast<std::size_t>(k) / nt;
    auto t = static_cast<std::size_t>(k) % nt;
    std::vector<int> y;
    y.reserve(train.size());
    for (const Sample* s : train) y.push_back(s->commitment[g][t]);
    try {
      ens.models[g][t] = train_target(X, y, cfg);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("target (" + std::to_string(g) + "," + std::to_string(t) +
                           "): " + e.what());
    }
  });
  ens.train_seconds = wall_clock_seconds() - t0;
  return ens;
}

/// Mean absolute agreement over equally shaped 0/1 matrices.
inline double accuracy(const std::vector<std::vector<std::vector<int>>>& predicted,
                       const std::vector<std::vector<std::vector<int>>>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw ShapeMismatch("prediction and truth counts differ or are empty");
  double wrong = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != truth[i].size())
      throw ShapeMismatch("matrix " + std::to_string(i) + " row count differs");
    for (std::size_t g = 0; g < predicted[i].size(); ++g) {
      if (predicted[i][g].size() != truth[i][g].size())
        throw ShapeMismatch("matrix " + std::to_string(i) + " column count differs");
      for (std::size_t t = 0; t < predicted[i][g].size(); ++t) {
        wrong += std::abs(predicted[i][g][t] - truth[i][g][t]);
        ++cells;
      }
    }
  }
  return 1.0 - wrong / static_cast<double>(cells);
}

inline std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 4; i <= 16; ++i) grid.push_back(static_cast<double>(i) / 20.0);
  return grid;
}

/// Training-split accuracy per candidate threshold; ties go to the largest.
inline double tune_threshold(const LrEnsemble& ens, const Dataset& ds,
                             const std::vector<double>& grid) {
  if (grid.empty()) throw ValidationError("threshold grid is empty");
  for (double g : grid)
    if (g < 0.0 || g > 1.0) throw ValidationError("thresholds must lie in [0,1]");
  if (!ds.has_split) throw ValidationError("dataset has no train/test split");

  auto train = select_samples(ds, ds.split.train_ids);
  std::vector<PredictionSet> preds;
  preds.reserve(train.size());
  std::vector<std::vector<std::vector<int>>> truth;
  for (const Sample* s : train) {
    preds.push_back(predict(ens, s->demand));
    truth.push_back(s->commitment);
  }

  double best_theta = grid[0], best_acc = -1.0;
  for (double theta : grid) {
    std::vector<std::vector<std::vector<int>>> classified;
    classified.reserve(preds.size());
    for (const auto& p : preds) {
      auto m = p.probabilities;
      std::vector<std::vector<int>> cls(m.size());
      for (std::size_t g = 0; g < m.size(); ++g) {
        cls[g].resize(m[g].size());
        for (std::size_t t = 0; t < m[g].size(); ++t) cls[g][t] = m[g][t] >= theta ? 1 : 0;
      }
      classified.push_back(std::move(cls));
    }
    double acc = accuracy(classified, truth);
    if (acc > best_acc || (acc == best_acc && theta > best_theta)) {
      best_acc = acc;
      best_theta = theta;
    }
  }
  return best_theta;
}

// ---------------------------------------------------------------------------
// Model file: plain JSON, shortest round-trip doubles, no timing fields, so
// save -> load -> save is byte-identical.
// ---------------------------------------------------------------------------
inline void save_model(const LrEnsemble& ens, const std::string& path) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& row : ens.models) {
    nlohmann::json jrow = nlohmann::json::array();
    for (const auto& m : row) {
      nlohmann::json jm{{"w", m.weights}, {"c", m.intercept}};
      if (m.constant_class >= 0)
        jm["constant_class"] = m.constant_class;
      else
        jm["constant_class"] = nullptr;
      jrow.push_back(std::move(jm));
    }
    targets.push_back(std::move(jrow));
  }
  nlohmann::json j{{"system_hash", ens.system_hash},
                   {"n_generators", ens.n_generators},
                   {"n_periods", ens.n_periods},
                   {"n_buses", ens.n_buses},
                   {"threshold", ens.threshold},
                   {"config",
                    {{"penalty", ens.config.penalty},
                     {"tol", ens.config.tol},
                     {"max_iter", ens.config.max_iter},
                     {"seed", ens.config.seed}}},
                   {"scaler", {{"min", ens.scaler.mins}, {"max", ens.scaler.maxs}}},
                   {"targets", targets}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline LrEnsemble load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  LrEnsemble ens;
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    ens.system_hash = j.at("system_hash").get<std::string>();
    ens.n_generators = j.at("n_generators").get<int>();
    ens.n_periods = j.at("n_periods").get<int>();
    ens.n_buses = j.at("n_buses").get<int>();
    ens.threshold = j.at("threshold").get<double>();
    const auto& cfg = j.at("config");
    ens.config.penalty = cfg.at("penalty").get<double>();
    ens.config.tol = cfg.at("tol").get<double>();
    ens.config.max_iter = cfg.at("max_iter").get<int>();
    ens.config.seed = cfg.at("seed").get<std::uint64_t>();
    ens.scaler.mins = j.at("scaler").at("min").get<std::vector<double>>();
    ens.scaler.maxs = j.at("scaler").at("max").get<std::vector<double>>();
    for (const auto& jrow : j.at("targets")) {
      std::vector<LrTargetModel> row;
      for (const auto& jm : jrow) {
        LrTargetModel m;
        m.weights = jm.at("w").get<std::vector<double>>();
        m.intercept = jm.at("c").get<double>();
        m.penalty = ens.config.penalty;
        if (!jm.at("constant_class").is_null())
          m.constant_class = jm.at("constant_class").get<int>();
        row.push_back(std::move(m));
      }
      ens.models.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model file: ") + e.what());
  }
  if (static_cast<int>(ens.models.size()) != ens.n_generators)
    throw ParseError("model grid does not match declared generator count");
  for (const auto& row : ens.models)
    if (static_cast<int>(row.size()) != ens.n_periods)
      throw ParseError("model grid does not match declared period count");
  return ens;
}

}  // namespace uclab
