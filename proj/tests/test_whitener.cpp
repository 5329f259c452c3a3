#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pairwhite/whitener.hpp"

using namespace pairwhite;

namespace {

// Standardized gaussian rows with population correlation `c`.
Eigen::MatrixXd correlated(const Eigen::MatrixXd& c, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0, 1);
  Eigen::MatrixXd g(n, c.cols());
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  const Eigen::MatrixXd l = c.llt().matrixL();
  return oracle::standardize(g * l.transpose());
}

FeaturePair pair(Index a, Index b) {
  return {{a, "f" + std::to_string(a)}, {b, "f" + std::to_string(b)}};
}

Eigen::MatrixXd corr2(double r) {
  Eigen::MatrixXd c(2, 2);
  c << 1, r, r, 1;
  return c;
}

// Hemisphere x tissue grid for one region: columns L_GM, R_GM, L_CSF, R_CSF.
Eigen::MatrixXd grid_corr(double h, double g) {
  Eigen::Matrix2d hemi, tissue;
  hemi << 1, h, h, 1;
  tissue << 1, g, g, 1;
  Eigen::MatrixXd c(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c.block(2 * i, 2 * j, 2, 2) = tissue(i, j) * hemi;
  return c;
}

PairManifest grid_manifest(double a_lr, double a_gc) {
  return PairManifest({{"left-right", a_lr, {pair(0, 1), pair(2, 3)}},
                       {"gm-csf", a_gc, {pair(0, 2), pair(1, 3)}}},
                      4);
}

// Correlation of one pair after a single 2x2 block at input correlation r.
double block_output_corr(double w11, double w12, double r) {
  const double cov = 2 * w11 * w12 + (w11 * w11 + w12 * w12) * r;
  const double var = w11 * w11 + w12 * w12 + 2 * w11 * w12 * r;
  return cov / var;
}

}  // namespace

TEST(Whitener, SinglePairMatchesClosedForm) {
  const auto x = correlated(corr2(0.6), 4000, 1);
  const auto w = fit_whitener(x, PairManifest({{"s", 1.0, {pair(0, 1)}}}, 2));
  const auto& p = w.stages()[0].pairs[0];
  EXPECT_NEAR(p.r, oracle::sample_corr(x.col(0), x.col(1)), 1e-12);
  const auto ref = oracle::zca_cor_bruteforce(p.r);
  EXPECT_NEAR(p.block.w11(), ref(0, 0), 1e-10);
  EXPECT_NEAR(p.block.w12(), ref(0, 1), 1e-10);
  EXPECT_FALSE(w.final_scale().has_value());
  const auto z = w.transform(x);
  EXPECT_LT(std::abs(oracle::sample_corr(z.col(0), z.col(1))), 1e-8);
}

TEST(Whitener, ZeroStagesIsExactIdentity) {
  const auto x = correlated(grid_corr(0.7, -0.5), 100, 2);
  const auto w = fit_whitener(x, PairManifest({}, 4));
  EXPECT_TRUE(w.is_identity());
  EXPECT_EQ(w.transform(x), x);
  const WeightVector b(Eigen::Vector4d(0.1, -2, 3, 0), Space::whitened);
  EXPECT_EQ(w.project_weights(b).values(), b.values());
  const auto empty = fit_whitener(x, PairManifest({{"lr", 0.3, {}}}, 4));
  EXPECT_TRUE(empty.is_identity());
  EXPECT_EQ(empty.transform(x), x);
}

TEST(Whitener, SecondStageFittedOnFirstStageOutput) {
  Eigen::MatrixXd c(3, 3);
  c << 1, 0.7, 0.2, 0.7, 1, 0.6, 0.2, 0.6, 1;
  const auto x = correlated(c, 3000, 3);
  const PairManifest m({{"a", 0.3, {pair(0, 1)}}, {"b", 1.0, {pair(0, 2)}}}, 3);
  const auto w = fit_whitener(x, m);

  // Independent reconstruction of the stage-1 output.
  const double r1 = oracle::sample_corr(x.col(0), x.col(1));
  const Eigen::Matrix2d w1 = 0.3 * oracle::zca_cor_bruteforce(r1) + 0.7 * Eigen::Matrix2d::Identity();
  Eigen::MatrixXd y = x;
  y.leftCols(2) = oracle::standardize(x.leftCols(2)) * w1;
  const double r_after_stage1 = oracle::sample_corr(y.col(0), y.col(2));
  const double r_raw = oracle::sample_corr(x.col(0), x.col(2));
  ASSERT_GT(std::abs(r_after_stage1 - r_raw), 0.01);

  const double fitted = w.stages()[1].pairs[0].r;
  EXPECT_NEAR(fitted, r_after_stage1, 1e-12);
  EXPECT_GT(std::abs(fitted - r_raw), 0.01);
}

TEST(Whitener, FullStrengthStagesDecorrelate) {
  const auto x = correlated(grid_corr(0.7, -0.5), 2000, 4);
  const auto w = fit_whitener(x, grid_manifest(1.0, 1.0));
  const auto z = w.transform(x);
  EXPECT_LT(std::abs(oracle::sample_corr(z.col(0), z.col(2))), 1e-8);
  EXPECT_LT(std::abs(oracle::sample_corr(z.col(1), z.col(3))), 1e-8);

  const auto w1 = fit_whitener(x, PairManifest({{"lr", 1.0, {pair(0, 1), pair(2, 3)}}}, 4));
  const auto z1 = w1.transform(x);
  EXPECT_LT(std::abs(oracle::sample_corr(z1.col(0), z1.col(1))), 1e-8);
  EXPECT_LT(std::abs(oracle::sample_corr(z1.col(2), z1.col(3))), 1e-8);
}

TEST(Whitener, PartialStrengthShrinksCorrelation) {
  // Frozen from an independent numpy computation at r = 0.6, alpha = 0.3.
  const auto w06 = regularized_matrix(zca_cor_matrix(PairCorrelation(0.6)).matrix, 0.3);
  EXPECT_NEAR(block_output_corr(w06.w11(), w06.w12(), 0.6), 0.43621746317509724, 1e-12);

  const auto x = correlated(corr2(0.6), 5000, 5);
  const auto w = fit_whitener(x, PairManifest({{"s", 0.3, {pair(0, 1)}}}, 2));
  const auto& p = w.stages()[0].pairs[0];
  const auto z = w.transform(x);
  const double out = oracle::sample_corr(z.col(0), z.col(1));
  EXPECT_GT(out, 0.0);
  EXPECT_LT(out, p.r);
  EXPECT_NEAR(out, block_output_corr(p.block.w11(), p.block.w12(), p.r), 1e-10);
  EXPECT_NEAR(out, 0.4362, 0.03);
  // Final rescale restores unit variance.
  ASSERT_TRUE(w.final_scale().has_value());
  EXPECT_LT((oracle::standardize(z) - z).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whitener, ProjectWeightsMatchesBlockColumns) {
  const auto x = correlated(corr2(0.6), 500, 6);
  const auto w = fit_whitener(x, PairManifest({{"s", 1.0, {pair(0, 1)}}}, 2));
  const auto& p = w.stages()[0].pairs[0];
  const auto theta = w.project_weights(WeightVector(Eigen::Vector2d(1, 0), Space::whitened));
  EXPECT_EQ(theta.space(), Space::feature);
  EXPECT_NEAR(theta[0], p.scale_first * p.block.w11(), 1e-15);
  EXPECT_NEAR(theta[1], p.scale_second * p.block.w12(), 1e-15);
}

TEST(Whitener, PredictionEquivalenceAfterBackProjection) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0, 1);
  for (double a : {0.0, 0.3, 1.0}) {
    const auto x = correlated(grid_corr(0.7, -0.5), 300, 8);
    const auto w = fit_whitener(x, grid_manifest(a, 1.0));
    Eigen::Vector4d beta;
    for (int i = 0; i < 4; ++i) beta[i] = nd(rng);
    const auto theta = w.project_weights(WeightVector(beta, Space::whitened));
    const Eigen::VectorXd lhs = x * theta.values();
    const Eigen::VectorXd rhs = w.transform(x) * beta;
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10 * (1 + rhs.cwiseAbs().maxCoeff()));
  }
}

TEST(Whitener, OrderPreservation) {
  const auto x = correlated(corr2(0.6), 800, 9);
  const auto w = fit_whitener(x, PairManifest({{"s", 1.0, {pair(0, 1)}}}, 2));
  auto check = [&](double b1, double b2) {
    return w.check_order_preservation(0, WeightVector(Eigen::Vector2d(b1, b2), Space::whitened))[0];
  };
  const auto gt = check(2, 1);
  EXPECT_TRUE(gt.preserved);
  EXPECT_GT(gt.theta_diff, 0.0);
  const auto eq = check(1, 1);
  EXPECT_TRUE(eq.preserved);
  EXPECT_EQ(eq.theta_diff, 0.0);
  EXPECT_THROW(w.check_order_preservation(1, WeightVector(Eigen::Vector2d(1, 1), Space::whitened)),
               ConfigError);
}

TEST(Whitener, OrderPreservationSweep) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ur(-0.999, 0.999), ub(-5, 5), ua(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double r = ur(rng), b1 = ub(rng), b2 = ub(rng);
    const auto blk = regularized_matrix(zca_cor_matrix(PairCorrelation(r)).matrix, ua(rng));
    const auto t = blk.apply(b1, b2);
    EXPECT_EQ(b1 > b2, t[0] > t[1]) << "r=" << r << " b=(" << b1 << "," << b2 << ")";
  }
}

TEST(Whitener, ZeroAlphaIsIdentity) {
  const auto x = correlated(grid_corr(0.7, -0.5), 200, 11);
  const auto w = fit_whitener(x, grid_manifest(0.0, 0.0));
  EXPECT_LT((w.transform(x) - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whitener, LinearAndRowIndependent) {
  const auto x = correlated(grid_corr(0.7, -0.5), 200, 12);
  const auto w = fit_whitener(x, grid_manifest(0.3, 1.0));
  const auto y = correlated(grid_corr(0.1, 0.2), 200, 13);
  const Eigen::MatrixXd lhs = w.transform(2.5 * x - 0.5 * y);
  const Eigen::MatrixXd rhs = 2.5 * w.transform(x) - 0.5 * w.transform(y);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd full = w.transform(x);
  for (Index i : {0, 17, 199}) EXPECT_EQ(w.transform(x.row(i)), full.row(i));
}

TEST(Whitener, DenseEqualsExplicitProduct) {
  const auto x = correlated(grid_corr(0.7, -0.5), 300, 14);
  const auto w = fit_whitener(x, grid_manifest(0.3, 1.0));
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(4, 4);
  for (const auto& s : w.stages()) {
    Eigen::MatrixXd sc = Eigen::MatrixXd::Identity(4, 4), wb = Eigen::MatrixXd::Identity(4, 4);
    for (const auto& p : s.pairs) {
      sc(p.first, p.first) = p.scale_first;
      sc(p.second, p.second) = p.scale_second;
      wb(p.first, p.first) = wb(p.second, p.second) = p.block.w11();
      wb(p.first, p.second) = wb(p.second, p.first) = p.block.w12();
    }
    t = t * sc * wb;
  }
  ASSERT_TRUE(w.final_scale().has_value());
  t = t * w.final_scale()->asDiagonal();
  EXPECT_LT((w.dense() - t).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((x * t - w.transform(x)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whitener, JsonRoundTripIsBitIdentical) {
  const auto x = correlated(grid_corr(0.7, -0.5), 300, 15);
  const auto w = fit_whitener(x, grid_manifest(0.3, 1.0));
  const auto back = FittedWhitener::from_json(nlohmann::json::parse(w.to_json().dump()));
  EXPECT_EQ(back.transform(x), w.transform(x));
  EXPECT_EQ(back.to_json().dump(), w.to_json().dump());
  EXPECT_THROW(FittedWhitener::from_json(nlohmann::json::parse(R"({"format": "x"})")), ConfigError);
  auto j = w.to_json();
  j["extra"] = 1;
  EXPECT_THROW(FittedWhitener::from_json(j), ConfigError);
}

TEST(Whitener, RejectsBadInputs) {
  const auto x = correlated(corr2(0.5), 100, 16);
  const PairManifest m({{"s", 1.0, {pair(0, 1)}}}, 2);
  EXPECT_THROW(fit_whitener(3.0 * x, m), DataError);
  EXPECT_THROW(fit_whitener(x.leftCols(1), m), DataError);
  EXPECT_THROW(fit_whitener(oracle::standardize(x.topRows(2)), m), DataError);
  const auto w = fit_whitener(x, m);
  EXPECT_THROW(w.transform(Eigen::MatrixXd::Zero(3, 3)), DataError);
  EXPECT_THROW(w.project_weights(WeightVector(Eigen::Vector2d(1, 0), Space::feature)), ConfigError);
  EXPECT_THROW(w.project_weights(WeightVector(Eigen::Vector3d(1, 0, 0), Space::whitened)), DataError);
}

TEST(Whitener, FlooredPairStaysFinite) {
  Eigen::MatrixXd x = correlated(corr2(0.0), 100, 17);
  x.col(1) = x.col(0);
  const auto w = fit_whitener(x, PairManifest({{"s", 1.0, {pair(0, 1)}}}, 2));
  EXPECT_TRUE(w.stages()[0].pairs[0].floored);
  EXPECT_TRUE(w.transform(x).allFinite());
}
