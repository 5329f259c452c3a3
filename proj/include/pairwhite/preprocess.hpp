#pragma once

// Fit-on-train / apply-anywhere confound residualization and standardization.
//
// Residualization is "adjusted": every feature is regressed by OLS on
// intercept + continuous confounds + one-hot categorical confounds
// (reference level dropped) + protected columns, and only the intercept and
// confound contributions are subtracted. Protected effects (diagnosis) stay
// in the residuals.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "pairwhite/error.hpp"
#include "pairwhite/table.hpp"

namespace pairwhite {

struct ConfoundSpec {
  std::vector<std::string> continuous;
  std::vector<std::string> categorical;
  // Columns kept in the regression but whose effect is not removed.
  std::vector<std::string> protected_columns;

  void validate(const FeatureTable& t) const {
    std::unordered_set<std::string> seen;
    for (const auto* group : {&continuous, &categorical, &protected_columns})
      for (const auto& name : *group) {
        if (!seen.insert(name).second)
          throw ConfigError("confound column '" + name + "' listed in more than one role");
        if (name == t.label_name && group != &protected_columns)
          throw ConfigError("label column '" + name + "' may only be protected");
        if (!t.has_column(name))
          throw ConfigError("confound column '" + name + "' not found in table");
      }
  }
};

struct DesignColumn {
  enum class Kind { intercept, continuous, level, protected_column };
  Kind kind;
  std::string source;  // table column
  std::string level;   // for Kind::level

  bool removable() const { return kind != Kind::protected_column; }

  std::string describe() const {
    switch (kind) {
      case Kind::intercept: return "(intercept)";
      case Kind::level: return source + "=" + level;
      default: return source;
    }
  }
};

class FittedResidualizer {
 public:
  const std::vector<DesignColumn>& layout() const noexcept { return layout_; }
  // p design columns x d features.
  const Eigen::MatrixXd& coefficients() const noexcept { return coef_; }
  Index fitted_rows() const noexcept { return n_train_; }

  Eigen::MatrixXd design(const FeatureTable& t) const {
    Eigen::MatrixXd d(t.rows(), static_cast<Index>(layout_.size()));
    for (std::size_t c = 0; c < layout_.size(); ++c) {
      const auto& col = layout_[c];
      const auto cc = static_cast<Index>(c);
      switch (col.kind) {
        case DesignColumn::Kind::intercept:
          d.col(cc).setOnes();
          break;
        case DesignColumn::Kind::continuous:
        case DesignColumn::Kind::protected_column:
          d.col(cc) = t.numeric(col.source);
          break;
        case DesignColumn::Kind::level: {
          const auto& values = t.covariate(col.source).values;
          for (Index i = 0; i < t.rows(); ++i)
            d(i, cc) = values[static_cast<std::size_t>(i)] == col.level ? 1.0 : 0.0;
          break;
        }
      }
    }
    return d;
  }

  // X - D_removable * B_removable. Protected columns are never read.
  Eigen::MatrixXd apply(const FeatureTable& t) const {
    check_levels(t);
    Eigen::MatrixXd out = t.features;
    for (std::size_t c = 0; c < layout_.size(); ++c) {
      const auto& col = layout_[c];
      if (!col.removable()) continue;
      const auto cc = static_cast<Index>(c);
      switch (col.kind) {
        case DesignColumn::Kind::intercept:
          out.rowwise() -= coef_.row(cc);
          break;
        case DesignColumn::Kind::continuous:
          out.noalias() -= t.numeric(col.source) * coef_.row(cc);
          break;
        case DesignColumn::Kind::level: {
          const auto& values = t.covariate(col.source).values;
          for (Index i = 0; i < t.rows(); ++i)
            if (values[static_cast<std::size_t>(i)] == col.level) out.row(i) -= coef_.row(cc);
          break;
        }
        default:
          break;
      }
    }
    return out;
  }

  friend FittedResidualizer fit_residualizer(const FeatureTable&, const ConfoundSpec&);

 private:
  void check_levels(const FeatureTable& t) const {
    for (const auto& [name, levels] : levels_) {
      const auto& values = t.covariate(name).values;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (!levels.count(values[i]))
          throw DataError("categorical column '" + name + "' row " +
                          std::to_string(i + 1) + ": level '" + values[i] +
                          "' was not seen when fitting");
    }
  }

  std::vector<DesignColumn> layout_;
  std::vector<std::pair<std::string, std::set<std::string>>> levels_;
  Eigen::MatrixXd coef_;
  Index n_train_ = 0;
};

inline FittedResidualizer fit_residualizer(const FeatureTable& train,
                                           const ConfoundSpec& spec) {
  spec.validate(train);
  FittedResidualizer r;
  r.layout_.push_back({DesignColumn::Kind::intercept, "", ""});
  for (const auto& c : spec.continuous)
    r.layout_.push_back({DesignColumn::Kind::continuous, c, ""});
  for (const auto& c : spec.categorical) {
    const auto& values = train.covariate(c).values;
    std::set<std::string> levels(values.begin(), values.end());
    if (levels.empty()) throw DataError("categorical column '" + c + "' has no levels");
    for (auto it = std::next(levels.begin()); it != levels.end(); ++it)
      r.layout_.push_back({DesignColumn::Kind::level, c, *it});
    r.levels_.emplace_back(c, std::move(levels));
  }
  for (const auto& c : spec.protected_columns)
    r.layout_.push_back({DesignColumn::Kind::protected_column, c, ""});

  const Eigen::MatrixXd d = r.design(train);
  const Index p = d.cols();
  if (train.rows() <= p) {
    std::ostringstream os;
    os << "residualizer needs more rows than design columns (" << train.rows()
       << " <= " << p << ")";
    throw DataError(os.str());
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::ostringstream os;
    os << "rank-deficient confound design (rank " << qr.rank() << " of " << p
       << "); collinear columns:";
    const auto& perm = qr.colsPermutation().indices();
    for (Index k = qr.rank(); k < p; ++k)
      os << " " << r.layout_[static_cast<std::size_t>(perm[k])].describe();
    throw DataError(os.str());
  }
  r.coef_ = qr.solve(train.features);
  r.n_train_ = train.rows();
  return r;
}

// Per-column (x - mean) / std with the population standard deviation.
class FittedScaler {
 public:
  const Eigen::RowVectorXd& mean() const noexcept { return mean_; }
  const Eigen::RowVectorXd& stddev() const noexcept { return std_; }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean_.cols())
      throw DataError("scaler fitted on " + std::to_string(mean_.cols()) +
                      " columns, got " + std::to_string(x.cols()));
    return (x.rowwise() - mean_).array().rowwise() / std_.array();
  }

  static FittedScaler from_stats(Eigen::RowVectorXd mean, Eigen::RowVectorXd stddev) {
    FittedScaler s;
    s.mean_ = std::move(mean);
    s.std_ = std::move(stddev);
    return s;
  }

  friend FittedScaler fit_scaler(const Eigen::MatrixXd&, const std::vector<std::string>&);

 private:
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd std_;
};

// `names` labels columns in error messages and may be empty.
inline FittedScaler fit_scaler(const Eigen::MatrixXd& train,
                               const std::vector<std::string>& names = {}) {
  if (train.rows() < 2) throw DataError("scaler needs at least two rows");
  FittedScaler s;
  s.mean_ = train.colwise().mean();
  s.std_ = ((train.rowwise() - s.mean_).array().square().colwise().sum() /
            static_cast<double>(train.rows()))
               .sqrt();
  for (Index j = 0; j < train.cols(); ++j) {
    if (!(s.std_[j] > 1e-12 * (1.0 + std::abs(s.mean_[j])))) {
      const auto name = static_cast<std::size_t>(j) < names.size()
                            ? names[static_cast<std::size_t>(j)]
                            : "#" + std::to_string(j);
      throw DataError("column '" + name + "' is constant on the training rows");
    }
  }
  return s;
}

}  // namespace pairwhite
