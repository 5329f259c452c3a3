#pragma once

// Student t-tests across cross-validation folds.

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "pairwhite/error.hpp"

namespace pairwhite {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

inline MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / n)};
}

enum class TTestMode { paired, two_sample };

struct PairedTestResult {
  std::string metric;
  TTestMode mode = TTestMode::paired;
  std::vector<double> differences;  // a - b per fold
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  // Zero variance: t is not defined; p is 1 for identical inputs and 0 for
  // a constant non-zero shift.
  bool degenerate = false;
  bool significant = false;  // p < 0.05

  std::string conclusion() const {
    if (degenerate)
      return significant ? "constant difference across folds"
                         : "identical across folds (exact equality)";
    return significant ? "significant difference (p < 0.05)"
                       : "no significant difference (p > 0.05)";
  }
};

namespace detail {

inline double two_sided_p(double t, double df) {
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace detail

// Two-sided paired t on per-fold differences, df = k - 1.
inline PairedTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                                      std::string metric = {}) {
  if (a.size() != b.size()) throw DataError("paired t-test needs equal-length inputs");
  if (a.size() < 2) throw DataError("paired t-test needs at least two folds");
  PairedTestResult r;
  r.metric = std::move(metric);
  r.mode = TTestMode::paired;
  for (std::size_t i = 0; i < a.size(); ++i) r.differences.push_back(a[i] - b[i]);
  const double k = static_cast<double>(a.size());
  r.df = k - 1.0;
  const double mean = std::accumulate(r.differences.begin(), r.differences.end(), 0.0) / k;
  double ss = 0.0;
  for (double d : r.differences) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (k - 1.0));
  if (sd == 0.0) {
    r.degenerate = true;
    r.t = 0.0;
    r.p = mean == 0.0 ? 1.0 : 0.0;
  } else {
    r.t = mean / (sd / std::sqrt(k));
    r.p = detail::two_sided_p(r.t, r.df);
  }
  r.significant = r.p < 0.05;
  return r;
}

// Pooled-variance two-sample Student t, df = 2k - 2.
inline PairedTestResult two_sample_t_test(const std::vector<double>& a,
                                          const std::vector<double>& b,
                                          std::string metric = {}) {
  if (a.size() < 2 || b.size() < 2) throw DataError("two-sample t-test needs two values per group");
  PairedTestResult r;
  r.metric = std::move(metric);
  r.mode = TTestMode::two_sample;
  if (a.size() == b.size())
    for (std::size_t i = 0; i < a.size(); ++i) r.differences.push_back(a[i] - b[i]);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / na;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / nb;
  double ss = 0.0;
  for (double x : a) ss += (x - ma) * (x - ma);
  for (double x : b) ss += (x - mb) * (x - mb);
  r.df = na + nb - 2.0;
  const double se = std::sqrt(ss / r.df * (1.0 / na + 1.0 / nb));
  if (se == 0.0) {
    r.degenerate = true;
    r.p = ma == mb ? 1.0 : 0.0;
  } else {
    r.t = (ma - mb) / se;
    r.p = detail::two_sided_p(r.t, r.df);
  }
  r.significant = r.p < 0.05;
  return r;
}

inline PairedTestResult t_test(const std::vector<double>& a, const std::vector<double>& b,
                               TTestMode mode, std::string metric = {}) {
  return mode == TTestMode::paired ? paired_t_test(a, b, std::move(metric))
                                   : two_sample_t_test(a, b, std::move(metric));
}

}  // namespace pairwhite
