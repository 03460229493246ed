#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hetsem/inference.hpp"
#include "oracles.hpp"

using namespace hetsem;
using fixture::vec3;

TEST(Information, AlphaBlockTraceFormEqualsHalfZtZ) {
  const ModelData d = fixture::sample(8, 0.4);
  const InformationMatrix info = information_matrix(d, vec3(1, -1, 0.5), vec3(0.3, -1, 1), 0.4);
  EXPECT_LE(info.alpha_block_discrepancy, 1e-10 * (0.5 * d.z().transpose() * d.z()).cwiseAbs().maxCoeff());
  EXPECT_TRUE(info.alpha_block().isApprox(0.5 * d.z().transpose() * d.z(), 1e-12));
}

TEST(Information, SymmetricPositiveDefiniteWithZeroBetaCrossBlocks) {
  const ModelData d = fixture::sample(8, 0.4);
  const InformationMatrix info = information_matrix(d, vec3(1, -1, 0.5), vec3(0.3, -1, 1), 0.4);
  EXPECT_TRUE(info.full.isApprox(info.full.transpose(), 1e-14));
  EXPECT_TRUE(info.positive_definite);
  EXPECT_EQ(info.full.block(0, 3, 3, 4).cwiseAbs().maxCoeff(), 0.0);
}

// Expected information equals E[-Hessian]; average the finite-difference
// Hessian of the log-likelihood over draws of the innovations at the truth.
TEST(Information, MatchesMonteCarloExpectedHessian) {
  const VectorXd beta = vec3(1, -1, 0.5), alpha = vec3(0, -1, 1);
  const double lambda = 0.5;
  SimConfig c = fixture::grid_config(5, lambda, alpha);
  const SimulationDesign design(c);
  // fixed covariates: replicate 0 supplies X and Z, later draws only the noise
  const SimulatedSample s0 = simulate_replicate(design, 0);
  const ModelData& d0 = s0.data;
  const InformationMatrix info = information_matrix(d0, beta, alpha, lambda);
  const MatrixXd b = oracle::dense_b(d0.w(), lambda);
  const Eigen::PartialPivLU<MatrixXd> lu(b);
  const VectorXd sd = s0.sigma2.cwiseSqrt();

  const int reps = 400;
  MatrixXd avg = MatrixXd::Zero(7, 7);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> norm;
  VectorXd theta(7);
  theta << beta, lambda, alpha;
  for (int r = 0; r < reps; ++r) {
    VectorXd eps(d0.n());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = sd[i] * norm(rng);
    const ModelData d = d0.with_response(d0.x() * beta + lu.solve(eps));
    // Hessian as a finite difference of the analytic score
    const double h = 1e-5;
    for (int j = 0; j < 7; ++j) {
      VectorXd up = theta, dn = theta;
      up[j] += h;
      dn[j] -= h;
      const VectorXd gu = score_hetsem(d, up.head(3), up.tail(3), up[3]);
      const VectorXd gd = score_hetsem(d, dn.head(3), dn.tail(3), dn[3]);
      avg.col(j) -= (gu - gd) / (2 * h) / reps;
    }
  }
  const MatrixXd& ref = info.full;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      const double scale = std::sqrt(ref(i, i) * ref(j, j));
      EXPECT_NEAR(avg(i, j), ref(i, j), 0.12 * scale) << i << "," << j;
    }
}

TEST(Information, StandardErrorsAndWald) {
  const ModelData d = fixture::sample(10, 0.5);
  const FitResult f = fit(d);
  const InformationMatrix info = information_matrix(d, f);
  const VectorXd se = standard_errors(info);
  ASSERT_EQ(se.size(), 7);
  EXPECT_TRUE((se.array() > 0).all());
  const auto rows = wald_tests(f, info);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_NEAR(rows[1].z, f.beta[1] / se[1], 1e-12);
  EXPECT_NEAR(two_sided_normal_p(1.959963984540054), 0.05, 1e-12);
  const WaldRow zero = wald_row("x", 0.0, 1.0);
  EXPECT_EQ(zero.z, 0.0);
  EXPECT_EQ(zero.p_value, 1.0);
}

TEST(Information, HpIndexRange) {
  const MatrixXd z = MatrixXd::Ones(4, 2);
  EXPECT_THROW(h_p_diag(z, VectorXd::Zero(2), 2), Error);
  EXPECT_TRUE(h_p_diag(z, VectorXd::Zero(2), 1).isApprox(VectorXd::Ones(4)));
}

TEST(BaselineInformation, OlsMatchesClassicalFormula) {
  const ModelData d = fixture::sample(8, 0.0, vec3(0, 0, 0));
  const BaselineFit f = fit_ols(d.y(), d.x());
  const VectorXd se = baseline_standard_errors(d, f);
  const MatrixXd cov = f.sigma2_pooled * (d.x().transpose() * d.x()).inverse();
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(se[j], std::sqrt(cov(j, j)), 1e-12);
  EXPECT_NEAR(se[3], f.sigma2_pooled * std::sqrt(2.0 / d.n()), 1e-12);
}

TEST(BaselineInformation, HoSemMatchesNumericalHessian) {
  const ModelData d = fixture::sample(8, 0.5, vec3(0, 0, 0));
  const BaselineFit f = fit_sem_homoscedastic(d);
  // observed information of the full homoscedastic likelihood at the MLE
  auto ll = [&d](const VectorXd& t) {
    const VectorXd e = d.filtered_y(t[3]) - d.filtered_x(t[3]) * t.head(3);
    const double n = static_cast<double>(d.n());
    return -0.5 * n * std::log(2 * M_PI * t[4]) + log_det_B(d.w(), t[3]) - 0.5 * e.squaredNorm() / t[4];
  };
  VectorXd th(5);
  th << f.beta, *f.spatial_param, f.sigma2_pooled;
  const double h = 1e-4;
  MatrixXd hess(5, 5);
  for (int j = 0; j < 5; ++j) {
    VectorXd up = th, dn = th;
    up[j] += h;
    dn[j] -= h;
    hess.col(j) = -(oracle::central_gradient(ll, up, 1e-5) - oracle::central_gradient(ll, dn, 1e-5)) / (2 * h);
  }
  const MatrixXd info = baseline_information(d, f);
  // expected and observed information agree to sampling order at n = 64
  for (int j = 0; j < 5; ++j)
    EXPECT_NEAR(info(j, j), hess(j, j), 0.35 * std::abs(hess(j, j))) << j;
}
