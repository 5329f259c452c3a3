#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "pairwhite/error.hpp"
#include "pairwhite/table.hpp"

namespace pairwhite {

namespace detail {

inline void check_metric_inputs(const Eigen::VectorXd& scores, const std::vector<int>& labels,
                                Index& n_pos, Index& n_neg) {
  if (static_cast<Index>(labels.size()) != scores.size())
    throw DataError("score and label counts differ");
  n_pos = 0;
  n_neg = 0;
  for (int y : labels) (y ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) throw DataError("metric needs both classes present");
}

}  // namespace detail

// Mann-Whitney U / (n_pos * n_neg) with tied scores counted half.
inline double roc_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  Index n_pos = 0, n_neg = 0;
  detail::check_metric_inputs(scores, labels, n_pos, n_neg);
  const Index n = scores.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] < scores[b]; });
  // Sum of 1-based mid-ranks of the positives.
  double rank_sum = 0.0;
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && scores[order[static_cast<std::size_t>(j + 1)]] ==
                            scores[order[static_cast<std::size_t>(i)]])
      ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k)
      if (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]) rank_sum += mid;
    i = j + 1;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// (sensitivity + specificity) / 2, predicting positive when score > threshold
// (a probability of exactly 0.5 is a negative call).
inline double balanced_accuracy(const Eigen::VectorXd& scores, const std::vector<int>& labels,
                                double threshold = 0.5) {
  Index n_pos = 0, n_neg = 0;
  detail::check_metric_inputs(scores, labels, n_pos, n_neg);
  Index tp = 0, tn = 0;
  for (Index i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    const bool y = labels[static_cast<std::size_t>(i)] != 0;
    if (pred && y) ++tp;
    if (!pred && !y) ++tn;
  }
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(n_pos) +
                static_cast<double>(tn) / static_cast<double>(n_neg));
}

}  // namespace pairwhite
