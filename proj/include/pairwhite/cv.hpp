#pragma once

// Cross-validated classification pipeline:
//   residualize -> standardize -> whiten (optional) -> grid search C -> fit
// with every fitted quantity estimated on the training rows of the fold.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/error.hpp"
#include "pairwhite/folds.hpp"
#include "pairwhite/logreg.hpp"
#include "pairwhite/manifest.hpp"
#include "pairwhite/metrics.hpp"
#include "pairwhite/preprocess.hpp"
#include "pairwhite/stats.hpp"
#include "pairwhite/table.hpp"
#include "pairwhite/whitener.hpp"

namespace pairwhite {

using Scorer = std::function<double(const Eigen::VectorXd&, const std::vector<int>&)>;

// The published grid lists {0.001, 0.01, 0, 1, 10}; 0 is not a valid inverse
// regularization strength and is read as 0.1.
inline const std::vector<double>& default_c_grid() {
  static const std::vector<double> grid{0.001, 0.01, 0.1, 1.0, 10.0};
  return grid;
}

inline void check_c_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("C grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) {
      std::ostringstream os;
      os << "C grid entry " << i + 1 << " (" << grid[i] << ") must be positive";
      throw ConfigError(os.str());
    }
}

struct GridSearchResult {
  std::vector<double> candidates;  // ascending
  std::vector<double> scores;      // mean inner-fold metric; empty for a singleton grid
  double selected = 0.0;
};

inline std::vector<int> take_labels(const std::vector<int>& y, const std::vector<Index>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(y[static_cast<std::size_t>(r)]);
  return out;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Index>& rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

// Inner stratified CV over the given rows only. Ties go to the smaller C.
inline GridSearchResult grid_search_c(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                      std::vector<double> grid, int folds, std::uint64_t seed,
                                      const Scorer& metric = roc_auc,
                                      const TrainOptions& train = {}) {
  check_c_grid(grid);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  GridSearchResult res;
  res.candidates = grid;
  if (grid.size() == 1) {
    res.selected = grid.front();
    return res;
  }
  const auto assign = stratified_kfold(y, folds, seed);
  res.scores.assign(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const auto tr = assign.train_rows(f), te = assign.test_rows(f);
    const Eigen::MatrixXd xtr = take_rows(x, tr), xte = take_rows(x, te);
    const auto ytr = take_labels(y, tr), yte = take_labels(y, te);
    for (std::size_t c = 0; c < grid.size(); ++c) {
      const auto m = train_logreg(xtr, ytr, grid[c], train);
      res.scores[c] += metric(predict_scores(m, xte), yte) / folds;
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < grid.size(); ++c)
    if (res.scores[c] > res.scores[best]) best = c;
  res.selected = grid[best];
  return res;
}

struct PipelineOptions {
  ConfoundSpec confounds;
  std::vector<double> c_grid = default_c_grid();
  int inner_folds = 5;
  TrainOptions train;
  WhitenerOptions whitener;
};

// Everything estimated from one fold's training rows.
struct FoldFit {
  FittedResidualizer residualizer;
  FittedScaler scaler;
  std::optional<FittedWhitener> whitener;
  GridSearchResult grid;
  LinearModel model;     // in the space the classifier saw
  WeightVector theta{Eigen::VectorXd(), Space::feature};  // standardized feature space

  // Maps raw table rows to classifier inputs.
  Eigen::MatrixXd prepare(const FeatureTable& t) const {
    Eigen::MatrixXd x = scaler.transform(residualizer.apply(t));
    if (whitener) x = whitener->transform(x);
    return x;
  }
};

// Fits the pipeline on `train`; no other rows are visible to it.
inline FoldFit fit_fold(const FeatureTable& train, const std::optional<PairManifest>& manifest,
                        const PipelineOptions& opt, std::uint64_t inner_seed) {
  FoldFit fit;
  fit.residualizer = fit_residualizer(train, opt.confounds);
  const Eigen::MatrixXd resid = fit.residualizer.apply(train);
  fit.scaler = fit_scaler(resid, train.feature_names);
  Eigen::MatrixXd x = fit.scaler.transform(resid);
  if (manifest) {
    fit.whitener = fit_whitener(x, *manifest, opt.whitener);
    if (!fit.whitener->is_identity()) x = fit.whitener->transform(x);
  }
  fit.grid = grid_search_c(x, train.labels, opt.c_grid, opt.inner_folds, inner_seed, roc_auc,
                           TrainOptions{opt.train.tol, opt.train.max_iter,
                                        manifest ? Space::whitened : Space::feature});
  fit.model = train_logreg(x, train.labels, fit.grid.selected,
                           TrainOptions{opt.train.tol, opt.train.max_iter,
                                        manifest ? Space::whitened : Space::feature});
  fit.theta = fit.whitener ? fit.whitener->project_weights(fit.model.weights)
                           : fit.model.weights;
  return fit;
}

struct FoldResult {
  int fold = 0;
  Index n_train = 0;
  Index n_test = 0;
  double roc_auc = 0.0;
  double balanced_accuracy = 0.0;
  FoldFit fit;
};

struct CvReport {
  bool whitened = false;
  std::optional<std::uint64_t> manifest_hash;
  FoldAssignment folds;
  std::vector<std::string> feature_names;
  std::vector<FoldResult> fold_results;
  Eigen::VectorXd weight_mean;  // feature space, over folds
  Eigen::VectorXd weight_std;   // population std over folds

  std::vector<double> metric(const std::string& name) const {
    std::vector<double> v;
    for (const auto& f : fold_results) {
      if (name == "roc_auc") v.push_back(f.roc_auc);
      else if (name == "balanced_accuracy") v.push_back(f.balanced_accuracy);
      else throw ConfigError("unknown metric '" + name + "'");
    }
    return v;
  }
};

inline std::uint64_t inner_seed_for(const FoldAssignment& folds, int fold) {
  return mix_seed(folds.seed, static_cast<std::uint64_t>(fold));
}

inline CvReport run_pipeline(const FeatureTable& table, const std::optional<PairManifest>& manifest,
                             const PipelineOptions& opt, const FoldAssignment& folds) {
  if (static_cast<Index>(folds.fold.size()) != table.rows())
    throw DataError("fold assignment covers " + std::to_string(folds.fold.size()) +
                    " rows, table has " + std::to_string(table.rows()));
  check_c_grid(opt.c_grid);
  CvReport rep;
  rep.whitened = manifest.has_value();
  if (manifest) rep.manifest_hash = manifest_hash(*manifest);
  rep.folds = folds;
  rep.feature_names = table.feature_names;
  for (int f = 0; f < folds.k; ++f) {
    try {
      const auto train = table.take_rows(folds.train_rows(f));
      const auto test = table.take_rows(folds.test_rows(f));
      FoldResult fr;
      fr.fold = f;
      fr.n_train = train.rows();
      fr.n_test = test.rows();
      fr.fit = fit_fold(train, manifest, opt, inner_seed_for(folds, f));
      const auto scores = predict_scores(fr.fit.model, fr.fit.prepare(test));
      fr.roc_auc = roc_auc(scores, test.labels);
      fr.balanced_accuracy = balanced_accuracy(scores, test.labels);
      rep.fold_results.push_back(std::move(fr));
    } catch (const ConfigError& e) {
      throw ConfigError("fold " + std::to_string(f + 1) + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError("fold " + std::to_string(f + 1) + ": " + e.what());
    }
  }
  const Index d = table.dims();
  const double k = static_cast<double>(folds.k);
  rep.weight_mean = Eigen::VectorXd::Zero(d);
  for (const auto& fr : rep.fold_results) rep.weight_mean += fr.fit.theta.values();
  rep.weight_mean /= k;
  rep.weight_std = Eigen::VectorXd::Zero(d);
  for (const auto& fr : rep.fold_results)
    rep.weight_std.array() += (fr.fit.theta.values() - rep.weight_mean).array().square();
  rep.weight_std = (rep.weight_std / k).cwiseSqrt();
  return rep;
}

// Both arms must come from the same fold assignment.
inline PairedTestResult compare_arms(const CvReport& a, const CvReport& b, const std::string& metric,
                                     TTestMode mode = TTestMode::paired) {
  if (!(a.folds == b.folds))
    throw DataError("compared pipelines used different fold assignments");
  return t_test(a.metric(metric), b.metric(metric), mode, metric);
}

struct WeightRow {
  std::string feature;
  double mean = 0.0;
  double std = 0.0;
};

struct TopWeights {
  std::vector<WeightRow> rows;
  bool clamped = false;  // k exceeded the feature count
};

// Sorted by |mean| descending, ties by feature name.
inline TopWeights top_k_weights(const std::vector<std::string>& names, const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& std, std::size_t k) {
  TopWeights out;
  std::vector<WeightRow> rows;
  for (std::size_t j = 0; j < names.size(); ++j)
    rows.push_back({names[j], mean[static_cast<Index>(j)], std[static_cast<Index>(j)]});
  std::sort(rows.begin(), rows.end(), [](const WeightRow& a, const WeightRow& b) {
    const double fa = std::abs(a.mean), fb = std::abs(b.mean);
    if (fa != fb) return fa > fb;
    return a.feature < b.feature;
  });
  if (k > rows.size()) {
    out.clamped = true;
    k = rows.size();
  }
  rows.resize(k);
  out.rows = std::move(rows);
  return out;
}

inline TopWeights top_k_weights(const CvReport& rep, std::size_t k) {
  return top_k_weights(rep.feature_names, rep.weight_mean, rep.weight_std, k);
}

// Machine-readable report. Full double precision throughout.
inline nlohmann::json report_to_json(const CvReport& rep) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  json j;
  j["format"] = "pairwhite-cv-report";
  j["version"] = 1;
  j["pipeline"] = {{"whitened", rep.whitened},
                   {"manifest_hash", rep.manifest_hash ? json(*rep.manifest_hash) : json(nullptr)}};
  j["folds"] = {{"k", rep.folds.k}, {"seed", rep.folds.seed}, {"assignment", rep.folds.fold}};
  j["features"] = rep.feature_names;
  j["per_fold"] = json::array();
  for (const auto& fr : rep.fold_results) {
    json jf = {{"fold", fr.fold},
               {"n_train", fr.n_train},
               {"n_test", fr.n_test},
               {"roc_auc", fr.roc_auc},
               {"balanced_accuracy", fr.balanced_accuracy},
               {"selected_C", fr.fit.grid.selected},
               {"grid", {{"candidates", fr.fit.grid.candidates}, {"scores", fr.fit.grid.scores}}},
               {"model", fr.fit.model.to_json()},
               {"feature_weights", vec(fr.fit.theta.values())}};
    j["per_fold"].push_back(std::move(jf));
  }
  const auto auc = mean_std(rep.metric("roc_auc"));
  const auto bacc = mean_std(rep.metric("balanced_accuracy"));
  j["summary"] = {{"roc_auc", {{"mean", auc.mean}, {"std", auc.std}}},
                  {"balanced_accuracy", {{"mean", bacc.mean}, {"std", bacc.std}}}};
  j["weights"] = {{"mean", vec(rep.weight_mean)}, {"std", vec(rep.weight_std)}};
  return j;
}

inline nlohmann::json test_to_json(const PairedTestResult& t) {
  return {{"metric", t.metric},
          {"mode", t.mode == TTestMode::paired ? "paired" : "two-sample"},
          {"differences", t.differences},
          {"t", t.t},
          {"p", t.p},
          {"df", t.df},
          {"degenerate", t.degenerate},
          {"significant", t.significant},
          {"conclusion", t.conclusion()}};
}

}  // namespace pairwhite
