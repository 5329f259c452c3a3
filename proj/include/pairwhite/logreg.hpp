#pragma once

// L2-regularized binary logistic regression.
//
// Objective over n rows with labels y in {0, 1}:
//
//   f(w, b) = mean_i softplus(-s_i * (x_i . w + b)) + ||w||^2 / (2 C n),
//
// with s_i = 2 y_i - 1 and the bias unpenalized. Minimized by a truncated
// Newton method (conjugate gradient on Hessian-vector products plus a
// backtracking line search) started from zero.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pairwhite/error.hpp"
#include "pairwhite/whitener.hpp"

namespace pairwhite {

inline double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

struct LinearModel {
  WeightVector weights{Eigen::VectorXd(), Space::whitened};
  double bias = 0.0;
  double c = 1.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // max-norm at exit

  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return x.dot(weights.values()) + bias;
  }

  nlohmann::json to_json() const {
    const auto& w = weights.values();
    return {{"format", "pairwhite-model"},
            {"version", 1},
            {"space", to_string(weights.space())},
            {"weights", std::vector<double>(w.data(), w.data() + w.size())},
            {"bias", bias},
            {"C", c},
            {"converged", converged},
            {"iterations", iterations},
            {"gradient_norm", gradient_norm}};
  }

  static LinearModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "pairwhite-model") throw ConfigError("not a model artifact");
      if (j.at("version") != 1) throw ConfigError("unsupported model artifact version");
      const auto space = j.at("space").get<std::string>();
      if (space != "whitened" && space != "feature")
        throw ConfigError("model artifact: unknown space '" + space + "'");
      auto w = j.at("weights").get<std::vector<double>>();
      LinearModel m;
      m.weights = WeightVector(Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Index>(w.size())),
                               space == "whitened" ? Space::whitened : Space::feature);
      m.bias = j.at("bias").get<double>();
      m.c = j.at("C").get<double>();
      m.converged = j.at("converged").get<bool>();
      m.iterations = j.at("iterations").get<int>();
      m.gradient_norm = j.at("gradient_norm").get<double>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed model artifact: ") + e.what());
    }
  }
};

// Value, gradient and Hessian-vector products of the regularized objective.
// Parameters are packed as [w; b].
class LogisticObjective {
 public:
  LogisticObjective(const Eigen::MatrixXd& x, const std::vector<int>& y, double c)
      : x_(x), sign_(x.rows()), lambda_(1.0 / (c * static_cast<double>(x.rows()))) {
    for (Index i = 0; i < x.rows(); ++i) sign_[i] = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
  }

  Index params() const { return x_.cols() + 1; }

  double value(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd m = margins(theta);
    double loss = 0.0;
    for (Index i = 0; i < m.size(); ++i) loss += softplus(-m[i]);
    const auto w = theta.head(x_.cols());
    return loss / static_cast<double>(x_.rows()) + 0.5 * lambda_ * w.squaredNorm();
  }

  // Also caches the curvature weights p(1-p) for hessian_times().
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) {
    const Eigen::VectorXd m = margins(theta);
    const double inv_n = 1.0 / static_cast<double>(x_.rows());
    Eigen::VectorXd r(m.size());
    curvature_.resize(m.size());
    for (Index i = 0; i < m.size(); ++i) {
      const double q = logistic(-m[i]);  // 1 - sigmoid(margin)
      r[i] = -sign_[i] * q * inv_n;
      curvature_[i] = q * (1.0 - q) * inv_n;
    }
    Eigen::VectorXd g(params());
    g.head(x_.cols()).noalias() = x_.transpose() * r;
    g.head(x_.cols()) += lambda_ * theta.head(x_.cols());
    g[x_.cols()] = r.sum();
    return g;
  }

  Eigen::VectorXd hessian_times(const Eigen::VectorXd& v) const {
    const Index d = x_.cols();
    Eigen::VectorXd xv = x_ * v.head(d);
    xv.array() += v[d];
    xv.array() *= curvature_.array();
    Eigen::VectorXd out(params());
    out.head(d).noalias() = x_.transpose() * xv;
    out.head(d) += lambda_ * v.head(d);
    out[d] = xv.sum();
    return out;
  }

 private:
  Eigen::VectorXd margins(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd s = x_ * theta.head(x_.cols());
    s.array() += theta[x_.cols()];
    return s.cwiseProduct(sign_);
  }

  const Eigen::MatrixXd& x_;
  Eigen::VectorXd sign_;
  Eigen::VectorXd curvature_;
  double lambda_;
};

struct TrainOptions {
  double tol = 1e-8;  // gradient max-norm
  int max_iter = 500;
  Space space = Space::whitened;
};

inline void check_training_inputs(const Eigen::MatrixXd& x, const std::vector<int>& y) {
  if (static_cast<Index>(y.size()) != x.rows())
    throw DataError("label count does not match row count");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
    (v ? pos : neg) = true;
  }
  if (!pos || !neg) throw DataError("training labels contain a single class");
  if (!x.allFinite()) throw DataError("training matrix contains non-finite values");
}

inline LinearModel train_logreg(const Eigen::MatrixXd& x, const std::vector<int>& y, double c,
                                const TrainOptions& opt = {}) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    std::ostringstream os;
    os << "inverse regularization C must be positive, got " << c;
    throw ConfigError(os.str());
  }
  check_training_inputs(x, y);

  LogisticObjective obj(x, y, c);
  const Index p = obj.params();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  double f = obj.value(theta);
  Eigen::VectorXd g = obj.gradient(theta);

  LinearModel m;
  m.c = c;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double gmax = g.cwiseAbs().maxCoeff();
    if (gmax < opt.tol) {
      m.converged = true;
      break;
    }
    // Inexact Newton step: CG on H d = -g to relative residual eta.
    const double gnorm = g.norm();
    const double eta = std::min(0.5, std::sqrt(gnorm));
    Eigen::VectorXd step = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd res = -g;
    Eigen::VectorXd dir = res;
    double rr = res.squaredNorm();
    for (Index k = 0; k < 2 * p && std::sqrt(rr) > eta * gnorm; ++k) {
      const Eigen::VectorXd hd = obj.hessian_times(dir);
      const double curv = dir.dot(hd);
      if (curv <= 0.0) break;
      const double a = rr / curv;
      step += a * dir;
      res -= a * hd;
      const double rr_next = res.squaredNorm();
      dir = res + (rr_next / rr) * dir;
      rr = rr_next;
    }
    if (step.isZero(0.0)) step = -g;

    // Armijo backtracking.
    const double slope = g.dot(step);
    double t = 1.0;
    Eigen::VectorXd trial = theta + step;
    double ft = obj.value(trial);
    while (ft > f + 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      trial = theta + t * step;
      ft = obj.value(trial);
    }
    if (ft > f) break;  // no progress possible in floating point
    theta = std::move(trial);
    f = ft;
    g = obj.gradient(theta);
  }
  m.iterations = it;
  m.gradient_norm = g.cwiseAbs().maxCoeff();
  if (!m.converged && m.gradient_norm < opt.tol) m.converged = true;
  m.weights = WeightVector(theta.head(x.cols()), opt.space);
  m.bias = theta[x.cols()];
  return m;
}

inline Eigen::VectorXd predict_scores(const LinearModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.weights.size()) {
    std::ostringstream os;
    os << "model has " << m.weights.size() << " weights, matrix has " << x.cols() << " columns";
    throw DataError(os.str());
  }
  Eigen::VectorXd s = x * m.weights.values();
  for (Index i = 0; i < s.size(); ++i) s[i] = logistic(s[i] + m.bias);
  return s;
}

}  // namespace pairwhite
