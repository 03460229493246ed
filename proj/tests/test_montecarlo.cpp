#include <gtest/gtest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "hetsem/montecarlo.hpp"

using namespace hetsem;
using fixture::vec3;

TEST(MonteCarlo, QuantileType7) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.05), 1.15);
  EXPECT_DOUBLE_EQ(quantile({10}, 0.95), 10.0);
  const ParamSummary s = summarize_values("x", {1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.sd, std::sqrt(2.5));
}

TEST(MonteCarlo, SampleShapeAndDesign) {
  const SimConfig c = fixture::grid_config(6, 0.4, vec3(0, -1, 1));
  const SimulationDesign design(c);
  const SimulatedSample s = simulate_replicate(design, 3);
  EXPECT_EQ(s.data.n(), 36);
  EXPECT_EQ(s.data.x().cols(), 3);
  EXPECT_TRUE(s.data.x().col(0).isOnes());
  EXPECT_TRUE(s.data.z().col(0).isOnes());
  EXPECT_EQ(s.data.z().col(1), s.data.x().col(2));  // Z = [1, x2, x3]
  EXPECT_GE(s.data.z().col(2).minCoeff(), 0.0);
  EXPECT_LE(s.data.z().col(2).maxCoeff(), 1.0);
  EXPECT_TRUE(s.data.w().row_standardized());
  EXPECT_TRUE(s.sigma2.isApprox((s.data.z() * c.alpha_true).array().exp().matrix()));
}

TEST(MonteCarlo, ReplicatesAreReproducibleAndDistinct) {
  const SimConfig c = fixture::grid_config(5, 0.2, vec3(0, -1, 1));
  EXPECT_EQ(generate_sample(c, 4).y(), generate_sample(c, 4).y());
  EXPECT_NE(generate_sample(c, 4).y(), generate_sample(c, 5).y());
}

// Pooled innovations B(y - X beta) over 10^5 draws: the variance regression
// on Z recovers alpha within 3 standard errors, and x1 ~ N(0,1), x2 ~ N(2,1).
TEST(MonteCarlo, PooledInnovationsRecoverAlpha) {
  const VectorXd alpha = vec3(0.5, -1, 1);
  const SimConfig c = fixture::grid_config(20, 0.6, alpha);
  const SimulationDesign design(c);
  const int reps = 250;
  const Eigen::Index n = c.n();
  VectorXd e(reps * n);
  MatrixXd z(reps * n, 3);
  for (int r = 0; r < reps; ++r) {
    const SimulatedSample s = simulate_replicate(design, static_cast<std::uint64_t>(r));
    e.segment(r * n, n) = s.data.filtered_y(0.6) - s.data.filtered_x(0.6) * c.beta_true;
    z.middleRows(r * n, n) = s.data.z();
  }
  const MatrixXd ones = MatrixXd::Ones(e.size(), 1);
  const JointFit f = fit_joint(e, ones, z);
  const MatrixXd cov = 2.0 * (z.transpose() * z).inverse();
  for (int j = 0; j < 3; ++j)
    EXPECT_LE(std::abs(f.alpha[j] - alpha[j]), 3.0 * std::sqrt(cov(j, j))) << j;
  EXPECT_NEAR(f.beta[0], 0.0, 0.02);
  EXPECT_NEAR(z.col(1).mean(), 2.0, 0.01);
}

TEST(MonteCarlo, ResultIndependentOfThreadCount) {
  SimConfig c = fixture::grid_config(6, 0.5, vec3(0, -1, 1));
  c.replications = 8;
  c.estimators = {Estimator::Proposed, Estimator::Sar, Estimator::Ols};
  const McResult a = run_monte_carlo(c, 1);
  const McResult b = run_monte_carlo(c, 3);
  ASSERT_EQ(a.records.size(), 24u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].params, b.records[i].params);
    EXPECT_EQ(a.records[i].estimator, b.records[i].estimator);
  }
}

TEST(MonteCarlo, SummaryNamesAndConvergence) {
  SimConfig c = fixture::grid_config(6, 0.5, vec3(0, -1, 1));
  c.replications = 5;
  c.estimators = {Estimator::Proposed, Estimator::HoSem};
  const McSummary s = summarize(run_monte_carlo(c, 1));
  EXPECT_EQ(s[Estimator::Proposed].params.size(), 7u);
  EXPECT_EQ(s[Estimator::HoSem].params.size(), 4u);
  EXPECT_EQ(s[Estimator::Proposed].param("lambda").count, 5);
  EXPECT_DOUBLE_EQ(s[Estimator::Proposed].convergence_rate(), 1.0);
}

TEST(MonteCarlo, BiasBoundIsZeroAtTruth) {
  const VectorXd s = VectorXd::Constant(4, 2.0);
  EXPECT_DOUBLE_EQ(bias_bound(0.5, s, 0.5, s), 0.0);
  EXPECT_GT(bias_bound(0.4, s, 0.5, s), 0.0);
}

TEST(MonteCarlo, Validation) {
  SimConfig c;
  c.replications = 0;
  EXPECT_THROW(validate(c), Error);
  c = SimConfig{};
  c.lambda_true = 1.0;
  EXPECT_THROW(validate(c), Error);
  EXPECT_THROW(parse_estimator("sarar"), Error);
  EXPECT_EQ(parse_estimator("ho-sem"), Estimator::HoSem);
}

TEST(MonteCarlo, WorkerCountHonoursEnvironmentCap) {
  ::setenv("HETSEM_THREADS", "2", 1);
  EXPECT_EQ(worker_count(8), 2u);
  ::unsetenv("HETSEM_THREADS");
  EXPECT_EQ(worker_count(3), 3u);
}

TEST(MonteCarlo, SweepExpansion) {
  SweepConfig s;
  s.alphas = design_alpha_grid(true);
  EXPECT_EQ(s.alphas.size(), 6u);
  EXPECT_EQ(design_alpha_grid(false).size(), 8u);
  const auto cells = expand(s);
  EXPECT_EQ(cells.size(), 4u * 6u * 7u);
  EXPECT_NE(cells[0].seed, cells[1].seed);
  EXPECT_EQ(expand(s)[5].seed, cells[5].seed);
}
