#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pairwhite/spectral.hpp"

using namespace pairwhite;

namespace {

// Max-norm of W R W - I, accumulated in long double so the check measures
// the stored block rather than the rounding of the product.
double whitening_residual(const WhiteningMatrix2x2& w, double r) {
  const long double a = w.w11(), b = w.w12(), rr = r;
  const long double d = a * a + 2 * a * b * rr + b * b;
  const long double o = 2 * a * b + (a * a + b * b) * rr;
  return static_cast<double>(std::max(std::abs(d - 1.0L), std::abs(o)));
}

}  // namespace

TEST(PairCorrelation, RejectsOutOfRange) {
  EXPECT_THROW(PairCorrelation(1.0000001), ConfigError);
  EXPECT_THROW(PairCorrelation(-1.5), ConfigError);
  EXPECT_THROW(PairCorrelation(std::nan("")), ConfigError);
  EXPECT_NO_THROW(PairCorrelation(1.0));
  EXPECT_NO_THROW(PairCorrelation(-1.0));
}

TEST(EigSym2x2, IdentityCase) {
  const auto e = eig_sym_2x2(PairCorrelation(0.0));
  EXPECT_EQ(e.values[0], 1.0);
  EXPECT_EQ(e.values[1], 1.0);
  const Eigen::Matrix2d rec = e.vectors * Eigen::Vector2d(1, 1).asDiagonal() * e.vectors.transpose();
  EXPECT_LT((rec - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EigSym2x2, MatchesIterativeSolverAtPointSix) {
  const auto e = eig_sym_2x2(PairCorrelation(0.6));
  EXPECT_NEAR(e.values[0], 1.6, 1e-15);
  EXPECT_NEAR(e.values[1], 0.4, 1e-15);
  Eigen::MatrixXd m(2, 2);
  m << 1, 0.6, 0.6, 1;
  const auto ref = oracle::jacobi_eigen(m);
  std::vector<double> got{e.values[0], e.values[1]};
  std::vector<double> want{ref.values[0], ref.values[1]};
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  EXPECT_NEAR(got[0], want[0], 1e-14);
  EXPECT_NEAR(got[1], want[1], 1e-14);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(e.vectors(0, 0), s, 1e-15);
  EXPECT_NEAR(e.vectors(1, 0), s, 1e-15);
  EXPECT_NEAR(e.vectors(0, 1), s, 1e-15);
  EXPECT_NEAR(e.vectors(1, 1), -s, 1e-15);
}

TEST(EigSym2x2, RankDeficient) {
  const auto e = eig_sym_2x2(PairCorrelation(-1.0));
  EXPECT_EQ(e.values[0], 0.0);
  EXPECT_EQ(e.values[1], 2.0);
}

TEST(EigSym2x2, ReconstructsAndIsOrthonormal) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const PairCorrelation r(u(rng));
    const auto e = eig_sym_2x2(r);
    const Eigen::Matrix2d lam = Eigen::Vector2d(e.values[0], e.values[1]).asDiagonal();
    EXPECT_LT((e.vectors * lam * e.vectors.transpose() - r.matrix()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((e.vectors.transpose() * e.vectors - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_GE(e.vectors(0, 0), 0.0);
    EXPECT_GE(e.vectors(0, 1), 0.0);
  }
}

TEST(ZcaCorMatrix, Uncorrelated) {
  const auto z = zca_cor_matrix(PairCorrelation(0.0));
  EXPECT_EQ(z.matrix.w11(), 1.0);
  EXPECT_EQ(z.matrix.w12(), 0.0);
  EXPECT_FALSE(z.floored);
}

TEST(ZcaCorMatrix, PointSixAgainstBruteForce) {
  const auto z = zca_cor_matrix(PairCorrelation(0.6));
  const auto ref = oracle::zca_cor_bruteforce(0.6);
  EXPECT_NEAR(z.matrix.w11(), ref(0, 0), 1e-12);
  EXPECT_NEAR(z.matrix.w12(), ref(0, 1), 1e-12);
  // Frozen from an independent numpy eigh computation.
  EXPECT_NEAR(z.matrix.w11(), 1.18585412, 1e-8);
  EXPECT_NEAR(z.matrix.w12(), -0.39528471, 1e-8);
  EXPECT_LT(whitening_residual(z.matrix, 0.6), 1e-14);
}

TEST(ZcaCorMatrix, FloorsNearUnitCorrelation) {
  const auto z = zca_cor_matrix(PairCorrelation(0.999999999));
  EXPECT_TRUE(z.floored);
  EXPECT_DOUBLE_EQ(z.effective_r, 1.0 - kEigenFloor);
  EXPECT_TRUE(std::isfinite(z.matrix.w11()));
  EXPECT_TRUE(std::isfinite(z.matrix.w12()));
  EXPECT_LT(z.matrix.w11(), 1e3);
  // Exact inverse of the floored matrix, not of the input.
  EXPECT_LT(whitening_residual(z.matrix, z.effective_r), 1e-9);
  EXPECT_GT(whitening_residual(z.matrix, 0.999999999), 1e-6);

  const auto z1 = zca_cor_matrix(PairCorrelation(1.0));
  EXPECT_TRUE(z1.floored);
  EXPECT_EQ(z1.matrix, z.matrix);
  const auto zm = zca_cor_matrix(PairCorrelation(-1.0));
  EXPECT_TRUE(zm.floored);
  EXPECT_GT(zm.matrix.w12(), 0.0);
}

TEST(ZcaCorMatrix, RejectsBadFloor) {
  EXPECT_THROW(zca_cor_matrix(PairCorrelation(0.1), 0.0), ConfigError);
}

TEST(ZcaCorMatrix, WhitensAcrossUnflooredRange) {
  std::mt19937_64 rng(11);
  const double lim = 1.0 - 2.0 * kEigenFloor;
  std::uniform_real_distribution<double> u(-lim, lim);
  for (int i = 0; i < 2000; ++i) {
    const double r = i == 0 ? lim : i == 1 ? -lim : u(rng);
    const auto z = zca_cor_matrix(PairCorrelation(r));
    EXPECT_FALSE(z.floored);
    EXPECT_LT(whitening_residual(z.matrix, r), 1e-10) << "r = " << r;
    EXPECT_GT(z.matrix.w11(), 0.0);
    EXPECT_GT(z.matrix.w11(), z.matrix.w12());
  }
}

TEST(ZcaCorMatrix, ClosedFormMatchesIterativeOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.999, 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double r = u(rng);
    const auto z = zca_cor_matrix(PairCorrelation(r));
    const auto ref = oracle::zca_cor_bruteforce(r);
    EXPECT_LT((z.matrix.dense() - ref).cwiseAbs().maxCoeff(), 1e-10) << "r = " << r;
  }
}

TEST(RegularizedMatrix, Endpoints) {
  const auto w = zca_cor_matrix(PairCorrelation(0.6)).matrix;
  const auto w0 = regularized_matrix(w, 0.0);
  EXPECT_EQ(w0.w11(), 1.0);
  EXPECT_EQ(w0.w12(), 0.0);
  EXPECT_EQ(regularized_matrix(w, 1.0), w);
}

TEST(RegularizedMatrix, PaperAlpha) {
  const auto w = zca_cor_matrix(PairCorrelation(0.6)).matrix;
  const auto wa = regularized_matrix(w, 0.3);
  EXPECT_NEAR(wa.w11(), 1.05575624, 1e-8);
  EXPECT_NEAR(wa.w12(), -0.11858541, 1e-8);
}

TEST(RegularizedMatrix, RejectsAlphaOutsideUnitInterval) {
  const auto w = WhiteningMatrix2x2::identity();
  EXPECT_THROW(regularized_matrix(w, -0.01), ConfigError);
  EXPECT_THROW(regularized_matrix(w, 1.01), ConfigError);
}

TEST(RegularizedMatrix, AffineInAlphaAndOrdered) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(-1.0, 1.0), ua(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto w = zca_cor_matrix(PairCorrelation(ur(rng))).matrix;
    const auto w0 = regularized_matrix(w, 0.0), w1 = regularized_matrix(w, 1.0);
    const auto wh = regularized_matrix(w, 0.5);
    EXPECT_NEAR(wh.w11(), 0.5 * (w0.w11() + w1.w11()), 1e-12);
    EXPECT_NEAR(wh.w12(), 0.5 * (w0.w12() + w1.w12()), 1e-12);
    const auto wa = regularized_matrix(w, ua(rng));
    EXPECT_GT(wa.w11(), 0.0);
    EXPECT_GT(wa.w11(), wa.w12());
  }
}

TEST(WhiteningMatrix2x2, RejectsInvalidEntries) {
  EXPECT_THROW(WhiteningMatrix2x2::from_entries(-1.0, -2.0), DataError);
  EXPECT_THROW(WhiteningMatrix2x2::from_entries(1.0, 1.0), DataError);
}
