#pragma once

// Multi-stage pairwise ZCA-cor whitening.
//
// Stage s acts on row vectors as x -> x * S_s * W_s where S_s rescales every
// paired column to unit variance (measured on the training rows that reach
// the stage) and W_s is block diagonal with one regularized ZCA-cor block per
// declared pair. A final diagonal rescale F is appended whenever some stage
// has alpha < 1. The composed operator is linear:
//
//   Z = X * T,   T = S_1 W_1 S_2 W_2 ... S_k W_k F
//
// and since every factor is symmetric, weights learnt on Z map back to the
// input space as theta = T * beta, giving X * theta == Z * beta.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/error.hpp"
#include "pairwhite/manifest.hpp"
#include "pairwhite/spectral.hpp"

namespace pairwhite {

enum class Space { whitened, feature };

inline const char* to_string(Space s) { return s == Space::whitened ? "whitened" : "feature"; }

class WeightVector {
 public:
  WeightVector(Eigen::VectorXd values, Space space)
      : values_(std::move(values)), space_(space) {}

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Space space() const noexcept { return space_; }
  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

 private:
  Eigen::VectorXd values_;
  Space space_;
};

struct FittedPair {
  Index first = 0;
  Index second = 0;
  double r = 0.0;          // training correlation entering the stage
  double scale_first = 1;  // 1 / std of the column entering the stage
  double scale_second = 1;
  WhiteningMatrix2x2 block = WhiteningMatrix2x2::identity();
  bool floored = false;
};

struct FittedStage {
  std::string label;
  double alpha = 1.0;
  std::vector<FittedPair> pairs;
};

struct PairOrder {
  Index first;
  Index second;
  double beta_diff;
  double theta_diff;
  bool preserved;
};

struct WhitenerOptions {
  double eigen_floor = kEigenFloor;
  // Allowed deviation of input column means from 0 and variances from 1.
  double standardized_tol = 1e-6;
};

namespace detail {

inline int sign(double v) { return (v > 0.0) - (v < 0.0); }

// Population moments of two columns.
inline void pair_moments(const Eigen::MatrixXd& x, Index a, Index b, double& sd_a,
                         double& sd_b, double& r) {
  const double n = static_cast<double>(x.rows());
  const double ma = x.col(a).mean();
  const double mb = x.col(b).mean();
  const auto ca = x.col(a).array() - ma;
  const auto cb = x.col(b).array() - mb;
  const double va = ca.square().sum() / n;
  const double vb = cb.square().sum() / n;
  const double cov = (ca * cb).sum() / n;
  sd_a = std::sqrt(va);
  sd_b = std::sqrt(vb);
  r = cov / (sd_a * sd_b);
  r = std::clamp(r, -1.0, 1.0);
}

}  // namespace detail

class FittedWhitener {
 public:
  FittedWhitener() = default;
  explicit FittedWhitener(Index dims) : dims_(dims) {}

  Index dims() const noexcept { return dims_; }
  const std::vector<FittedStage>& stages() const noexcept { return stages_; }
  const std::optional<Eigen::RowVectorXd>& final_scale() const noexcept { return final_scale_; }

  bool is_identity() const {
    for (const auto& s : stages_)
      if (!s.pairs.empty()) return false;
    return !final_scale_.has_value();
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    if (x.cols() != dims_) {
      std::ostringstream os;
      os << "whitener fitted on " << dims_ << " columns, got " << x.cols();
      throw DataError(os.str());
    }
    Eigen::MatrixXd z = x;
    for (const auto& s : stages_) apply_stage(s, z);
    if (final_scale_) z.array().rowwise() *= final_scale_->array();
    return z;
  }

  // theta = T * beta, so that X * theta == transform(X) * beta.
  WeightVector project_weights(const WeightVector& beta) const {
    if (beta.space() != Space::whitened)
      throw ConfigError("project_weights expects whitened-space weights");
    if (beta.size() != dims_) {
      std::ostringstream os;
      os << "weight vector has length " << beta.size() << ", expected " << dims_;
      throw DataError(os.str());
    }
    Eigen::VectorXd v = beta.values();
    if (final_scale_) v.array() *= final_scale_->transpose().array();
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it)
      for (const auto& p : it->pairs) {
        const auto t = p.block.apply(v[p.first], v[p.second]);
        v[p.first] = p.scale_first * t[0];
        v[p.second] = p.scale_second * t[1];
      }
    return WeightVector(std::move(v), Space::feature);
  }

  // Dense T; intended for small dims.
  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(dims_, dims_);
    for (const auto& s : stages_) apply_stage(s, t);
    if (final_scale_) t.array().rowwise() *= final_scale_->array();
    return t;
  }

  // Compares the order of each pair's weights before and after that stage's
  // 2x2 block alone.
  std::vector<PairOrder> check_order_preservation(std::size_t stage,
                                                  const WeightVector& beta) const {
    if (stage >= stages_.size())
      throw ConfigError("stage index " + std::to_string(stage) + " out of range");
    if (beta.size() != dims_) throw DataError("weight vector length mismatch");
    std::vector<PairOrder> out;
    for (const auto& p : stages_[stage].pairs) {
      const double b1 = beta[p.first], b2 = beta[p.second];
      const auto t = p.block.apply(b1, b2);
      const double bd = b1 - b2, td = t[0] - t[1];
      out.push_back({p.first, p.second, bd, td, detail::sign(bd) == detail::sign(td)});
    }
    return out;
  }

  nlohmann::json to_json() const {
    using nlohmann::json;
    json j;
    j["format"] = "pairwhite-whitener";
    j["version"] = 1;
    j["dims"] = dims_;
    j["stages"] = json::array();
    for (const auto& s : stages_) {
      json js;
      js["label"] = s.label;
      js["alpha"] = s.alpha;
      js["pairs"] = json::array();
      for (const auto& p : s.pairs)
        js["pairs"].push_back({{"first", p.first},
                               {"second", p.second},
                               {"r", p.r},
                               {"scale_first", p.scale_first},
                               {"scale_second", p.scale_second},
                               {"w11", p.block.w11()},
                               {"w12", p.block.w12()},
                               {"floored", p.floored}});
      j["stages"].push_back(std::move(js));
    }
    if (final_scale_) {
      j["final_scale"] = std::vector<double>(final_scale_->data(),
                                             final_scale_->data() + final_scale_->size());
    } else {
      j["final_scale"] = nullptr;
    }
    return j;
  }

  static FittedWhitener from_json(const nlohmann::json& j) {
    try {
      for (const auto& [key, _] : j.items())
        if (key != "format" && key != "version" && key != "dims" && key != "stages" &&
            key != "final_scale")
          throw ConfigError("whitener artifact: unknown key '" + key + "'");
      if (j.at("format") != "pairwhite-whitener")
        throw ConfigError("not a whitener artifact");
      if (j.at("version") != 1)
        throw ConfigError("unsupported whitener artifact version " + j.at("version").dump());
      FittedWhitener w(j.at("dims").get<Index>());
      for (const auto& js : j.at("stages")) {
        FittedStage s;
        s.label = js.at("label").get<std::string>();
        s.alpha = js.at("alpha").get<double>();
        check_alpha(s.alpha);
        for (const auto& jp : js.at("pairs")) {
          FittedPair p;
          p.first = jp.at("first").get<Index>();
          p.second = jp.at("second").get<Index>();
          if (p.first < 0 || p.first >= w.dims_ || p.second < 0 || p.second >= w.dims_ ||
              p.first == p.second)
            throw ConfigError("whitener artifact: invalid pair indices");
          p.r = jp.at("r").get<double>();
          p.scale_first = jp.at("scale_first").get<double>();
          p.scale_second = jp.at("scale_second").get<double>();
          p.block = WhiteningMatrix2x2::from_entries(jp.at("w11").get<double>(),
                                                     jp.at("w12").get<double>());
          p.floored = jp.at("floored").get<bool>();
          s.pairs.push_back(p);
        }
        w.stages_.push_back(std::move(s));
      }
      if (!j.at("final_scale").is_null()) {
        auto v = j.at("final_scale").get<std::vector<double>>();
        if (static_cast<Index>(v.size()) != w.dims_)
          throw ConfigError("whitener artifact: final_scale length mismatch");
        w.final_scale_ = Eigen::Map<Eigen::RowVectorXd>(v.data(), w.dims_);
      }
      return w;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed whitener artifact: ") + e.what());
    }
  }

  friend FittedWhitener fit_whitener(const Eigen::MatrixXd&, const PairManifest&,
                                     const WhitenerOptions&);

 private:
  static void apply_stage(const FittedStage& s, Eigen::MatrixXd& z) {
    for (const auto& p : s.pairs) {
      const double w11 = p.block.w11(), w12 = p.block.w12();
      for (Index i = 0; i < z.rows(); ++i) {
        const double a = p.scale_first * z(i, p.first);
        const double b = p.scale_second * z(i, p.second);
        z(i, p.first) = w11 * a + w12 * b;
        z(i, p.second) = w12 * a + w11 * b;
      }
    }
  }

  Index dims_ = 0;
  std::vector<FittedStage> stages_;
  std::optional<Eigen::RowVectorXd> final_scale_;
};

// Fits stages in manifest order; each stage's correlations are measured on
// the output of the previous stage.
inline FittedWhitener fit_whitener(const Eigen::MatrixXd& train, const PairManifest& manifest,
                                   const WhitenerOptions& opt = {}) {
  if (train.cols() != manifest.dims()) {
    std::ostringstream os;
    os << "manifest declares " << manifest.dims() << " features, matrix has " << train.cols();
    throw DataError(os.str());
  }
  if (train.rows() < 3) throw DataError("whitener needs at least 3 training rows");
  const double n = static_cast<double>(train.rows());
  for (Index j = 0; j < train.cols(); ++j) {
    const double m = train.col(j).mean();
    const double v = (train.col(j).array() - m).square().sum() / n;
    if (std::abs(m) > opt.standardized_tol || std::abs(v - 1.0) > opt.standardized_tol) {
      std::ostringstream os;
      os << "whitener input column " << j << " is not standardized (mean " << m
         << ", variance " << v << ")";
      throw DataError(os.str());
    }
  }

  FittedWhitener w(train.cols());
  Eigen::MatrixXd z = train;
  bool partial = false;
  for (const auto& st : manifest.stages()) {
    FittedStage fs{st.label, st.alpha, {}};
    for (const auto& pr : st.pairs) {
      FittedPair p;
      p.first = pr.first.index;
      p.second = pr.second.index;
      double sd_a = 0, sd_b = 0;
      detail::pair_moments(z, p.first, p.second, sd_a, sd_b, p.r);
      if (!(sd_a > 0.0 && sd_b > 0.0))
        throw DataError("pair (" + pr.first.name + ", " + pr.second.name +
                        ") has a constant column entering stage '" + st.label + "'");
      p.scale_first = 1.0 / sd_a;
      p.scale_second = 1.0 / sd_b;
      const auto zca = zca_cor_matrix(PairCorrelation(p.r), opt.eigen_floor);
      p.block = regularized_matrix(zca.matrix, st.alpha);
      p.floored = zca.floored;
      fs.pairs.push_back(p);
    }
    if (st.alpha < 1.0 && !st.pairs.empty()) partial = true;
    FittedWhitener::apply_stage(fs, z);
    w.stages_.push_back(std::move(fs));
  }
  if (partial) {
    Eigen::RowVectorXd inv_sd(z.cols());
    for (Index j = 0; j < z.cols(); ++j) {
      const double m = z.col(j).mean();
      inv_sd[j] = 1.0 / std::sqrt((z.col(j).array() - m).square().sum() / n);
    }
    w.final_scale_ = std::move(inv_sd);
  }
  return w;
}

}  // namespace pairwhite
