#pragma once

// Closed-form spectral machinery for 2x2 correlation matrices and the
// ZCA-cor whitening blocks built from them.
//
// Every correlation matrix handled here has the form [[1, r], [r, 1]], so its
// eigenvectors are fixed at (1, 1)/sqrt(2) and (1, -1)/sqrt(2) with
// eigenvalues 1 + r and 1 - r. The inverse square root therefore reduces to
// two scalars:
//
//   w11 = ((1 + r)^(-1/2) + (1 - r)^(-1/2)) / 2
//   w12 = ((1 + r)^(-1/2) - (1 - r)^(-1/2)) / 2

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "pairwhite/error.hpp"

namespace pairwhite {

// Default eigenvalue floor applied before inversion.
inline constexpr double kEigenFloor = 1e-6;

class PairCorrelation {
 public:
  explicit PairCorrelation(double r) : r_(r) {
    if (!(r >= -1.0 && r <= 1.0)) {
      std::ostringstream os;
      os << "invalid correlation " << r << ": must lie in [-1, 1]";
      throw ConfigError(os.str());
    }
  }

  double value() const noexcept { return r_; }

  // [[1, r], [r, 1]]
  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << 1.0, r_, r_, 1.0;
    return m;
  }

 private:
  double r_;
};

struct SymmetricEigen2 {
  // values[0] = 1 + r pairs with column 0 = (1, 1)/sqrt(2);
  // values[1] = 1 - r pairs with column 1 = (1, -1)/sqrt(2).
  std::array<double, 2> values;
  Eigen::Matrix2d vectors;
};

// Eigendecomposition of [[1, r], [r, 1]]. Eigenvector columns carry a
// non-negative first component.
inline SymmetricEigen2 eig_sym_2x2(PairCorrelation r) {
  const double s = 1.0 / std::sqrt(2.0);
  SymmetricEigen2 out;
  out.values = {1.0 + r.value(), 1.0 - r.value()};
  out.vectors << s, s, s, -s;
  return out;
}

// Symmetric 2x2 matrix [[w11, w12], [w12, w11]].
class WhiteningMatrix2x2 {
 public:
  static WhiteningMatrix2x2 identity() { return {1.0, 0.0}; }

  // Validates w11 > 0 and w11 > w12.
  static WhiteningMatrix2x2 from_entries(double w11, double w12) {
    if (!(w11 > 0.0 && w11 > w12) || !std::isfinite(w11) ||
        !std::isfinite(w12)) {
      std::ostringstream os;
      os << "whitening block [[" << w11 << ", " << w12
         << "], ...] violates w11 > 0 and w11 > w12";
      throw DataError(os.str());
    }
    return {w11, w12};
  }

  double w11() const noexcept { return w11_; }
  double w12() const noexcept { return w12_; }

  Eigen::Matrix2d dense() const {
    Eigen::Matrix2d m;
    m << w11_, w12_, w12_, w11_;
    return m;
  }

  // (W v) for a 2-vector; W is symmetric so this is also v^T W.
  std::array<double, 2> apply(double a, double b) const noexcept {
    return {w11_ * a + w12_ * b, w12_ * a + w11_ * b};
  }

  friend bool operator==(const WhiteningMatrix2x2&,
                         const WhiteningMatrix2x2&) = default;

 private:
  WhiteningMatrix2x2(double w11, double w12) : w11_(w11), w12_(w12) {}

  double w11_;
  double w12_;
};

struct ZcaCorBlock {
  WhiteningMatrix2x2 matrix;
  // Correlation actually inverted; differs from the input when floored.
  double effective_r;
  bool floored;
};

// ZCA-cor block U diag(lambda)^(-1/2) U^T. Eigenvalues below `eps` are
// raised to `eps`, which is equivalent to clamping r into
// [-1 + eps, 1 - eps].
inline ZcaCorBlock zca_cor_matrix(PairCorrelation r, double eps = kEigenFloor) {
  if (!(eps > 0.0 && eps < 1.0)) {
    std::ostringstream os;
    os << "eigenvalue floor must lie in (0, 1), got " << eps;
    throw ConfigError(os.str());
  }
  double rr = r.value();
  bool floored = false;
  if (1.0 - rr < eps) {
    rr = 1.0 - eps;
    floored = true;
  } else if (1.0 + rr < eps) {
    rr = -1.0 + eps;
    floored = true;
  }
  const double inv_hi = 1.0 / std::sqrt(1.0 + rr);
  const double inv_lo = 1.0 / std::sqrt(1.0 - rr);
  return {WhiteningMatrix2x2::from_entries(0.5 * (inv_hi + inv_lo),
                                           0.5 * (inv_hi - inv_lo)),
          rr, floored};
}

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    std::ostringstream os;
    os << "alpha " << alpha << " outside [0, 1]";
    throw ConfigError(os.str());
  }
}

// alpha * W + (1 - alpha) * I
inline WhiteningMatrix2x2 regularized_matrix(const WhiteningMatrix2x2& w,
                                             double alpha) {
  check_alpha(alpha);
  if (alpha == 1.0) return w;
  return WhiteningMatrix2x2::from_entries(alpha * w.w11() + (1.0 - alpha),
                                          alpha * w.w12());
}

}  // namespace pairwhite
