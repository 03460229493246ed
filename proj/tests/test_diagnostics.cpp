#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "hetsem/diagnostics.hpp"

using namespace hetsem;

namespace {

VectorXd iid(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm;
  VectorXd x(n);
  for (auto& v : x) v = norm(rng);
  return x;
}

// Dense-formula Moran's I.
double moran_dense(const VectorXd& x, const MatrixXd& w) {
  const VectorXd c = x.array() - x.mean();
  return static_cast<double>(x.size()) / w.sum() * c.dot(w * c) / c.squaredNorm();
}

}  // namespace

TEST(Moran, StatisticMatchesDenseFormula) {
  const WeightMatrix w = build_rook_grid(6, 7);
  const VectorXd x = iid(42, 1);
  EXPECT_NEAR(morans_i(x, w).I, moran_dense(x, w.dense()), 1e-12);
  const WeightMatrix ws = row_standardize(w);
  EXPECT_NEAR(morans_i(x, ws).I, moran_dense(x, ws.dense()), 1e-12);
}

TEST(Moran, WeightSums) {
  const WeightMatrix w = build_rook_grid(3, 3);
  const WeightSums s = weight_sums(w);
  const MatrixXd d = w.dense();
  EXPECT_DOUBLE_EQ(s.s0, d.sum());
  EXPECT_DOUBLE_EQ(s.s1, 0.5 * (d + d.transpose()).array().square().sum());
  EXPECT_DOUBLE_EQ(s.s2, (d.rowwise().sum() + d.colwise().sum().transpose()).array().square().sum());
}

TEST(Moran, ExpectationAndNormalityVariance) {
  const WeightMatrix w = build_rook_grid(5, 5);
  const MoranResult r = morans_i(iid(25, 2), w, MoranMoments::Normality);
  const double n = 25;
  EXPECT_DOUBLE_EQ(r.expectation, -1.0 / (n - 1));
  const WeightSums s = weight_sums(w);
  const double v = (n * n * s.s1 - n * s.s2 + 3 * s.s0 * s.s0) / ((n * n - 1) * s.s0 * s.s0) -
                   1.0 / ((n - 1) * (n - 1));
  EXPECT_NEAR(r.variance, v, 1e-14);
}

TEST(Moran, RandomizationVarianceAgreesWithPermutationVariance) {
  const WeightMatrix w = row_standardize(build_rook_grid(6, 6));
  const VectorXd x = iid(36, 3);
  const MoranResult r = morans_i(x, w, MoranMoments::Randomization);
  // empirical variance of I under random relabeling
  std::mt19937_64 rng(4);
  VectorXd perm = x;
  double sum = 0, sum2 = 0;
  const int reps = 20000;
  for (int k = 0; k < reps; ++k) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const double i = morans_i(perm, w, MoranMoments::Randomization).I;
    sum += i;
    sum2 += i * i;
  }
  const double mean = sum / reps, var = sum2 / reps - mean * mean;
  EXPECT_NEAR(mean, r.expectation, 0.005);
  EXPECT_NEAR(var, r.variance, 0.06 * r.variance);
}

TEST(Moran, NullCalibrationOnIidColumn) {
  const WeightMatrix w = row_standardize(build_rook_grid(20, 20));
  int reject = 0;
  const int reps = 200;
  for (int s = 0; s < reps; ++s)
    if (morans_i(iid(400, 100 + s), w).p_value < 0.05) ++reject;
  EXPECT_LE(reject, 20);  // 5% nominal, binomial sd ~ 3
}

TEST(Moran, DetectsSmoothedColumn) {
  const WeightMatrix w = row_standardize(build_rook_grid(20, 20));
  const VectorXd x = iid(400, 7);
  const VectorXd smooth = x + w.lag(x) + w.lag(w.lag(x));
  const MoranResult r = morans_i(smooth, w);
  EXPECT_GT(r.z, 0);
  EXPECT_LT(r.p_value, 0.01);
  EXPECT_LT(moran_permutation_test(smooth, w, 199, 5).p_value, 0.01);
}

TEST(Moran, PermutationDeterministicPerSeed) {
  const WeightMatrix w = row_standardize(build_rook_grid(5, 5));
  const VectorXd x = iid(25, 8);
  const auto a = moran_permutation_test(x, w, 99, 3);
  const auto b = moran_permutation_test(x, w, 99, 3);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_GE(a.p_value, 0.01);
  EXPECT_LE(a.p_value, 1.0);
}

TEST(Moran, ScatterSlopeEqualsIForRowStandardizedW) {
  const WeightMatrix w = row_standardize(build_rook_grid(7, 8));
  const VectorXd x = iid(56, 9) + w.lag(iid(56, 10));
  const MoranScatter s = moran_scatter(x, w);
  EXPECT_NEAR(scatter_slope(s), morans_i(x, w).I, 1e-12);
  EXPECT_NEAR(s.value.mean(), 0.0, 1e-12);
}

TEST(Moran, Errors) {
  const WeightMatrix w = build_rook_grid(3, 3);
  EXPECT_THROW(morans_i(VectorXd::Constant(9, 2.0), w), Error);
  EXPECT_THROW(morans_i(VectorXd::Ones(5), w), Error);
}

TEST(Moran, ProposedResidualsMostlyNonSignificant) {
  int significant = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const ModelData d = fixture::sample(12, 0.5, fixture::vec3(0, -1, 1), static_cast<std::uint64_t>(r));
    const FitResult f = fit(d);
    if (morans_i(innovation_residuals(d, f.beta, f.lambda), d.w()).p_value < 0.05) ++significant;
  }
  EXPECT_LE(significant, 4);
}
