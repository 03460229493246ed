#pragma once

// Expected information matrix of the heteroskedastic SEM at a fit, standard
// errors and Wald tests. Parameter order throughout: beta, lambda, alpha.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "hetsem/baselines.hpp"
#include "hetsem/error.hpp"
#include "hetsem/hetsem.hpp"
#include "hetsem/linalg.hpp"

namespace hetsem {

// Diagonal of H_p: d exp(z_i' alpha) / d alpha_p = z_ip exp(z_i' alpha).
// p is a 0-based column index of Z.
inline VectorXd h_p_diag(const MatrixXd& z, const VectorXd& alpha, Eigen::Index p) {
  require(z.cols() == alpha.size(), ErrorCode::Dimension, "h_p_diag: Z and alpha disagree");
  require(p >= 0 && p < z.cols(), ErrorCode::Dimension,
          "h_p_diag: index " + std::to_string(p) + " out of range");
  return z.col(p).cwiseProduct(detail::variances_from_linear_predictor(z * alpha));
}

struct InformationMatrix {
  MatrixXd full;
  Eigen::Index k = 0;  // mean parameters
  Eigen::Index p = 0;  // variance parameters
  bool positive_definite = false;
  // Largest entrywise gap between the trace form of the alpha block and Z'Z/2.
  double alpha_block_discrepancy = 0.0;

  Eigen::Index lambda_index() const { return k; }
  auto beta_block() const { return full.topLeftCorner(k, k); }
  double lambda_lambda() const { return full(k, k); }
  auto lambda_alpha() const { return full.block(k, k + 1, 1, p); }
  auto alpha_block() const { return full.bottomRightCorner(p, p); }
};

inline InformationMatrix information_matrix(const ModelData& data, const VectorXd& beta,
                                            const VectorXd& alpha, double lambda) {
  require_lambda(lambda);
  const Eigen::Index n = data.n();
  const Eigen::Index k = data.x().cols();
  const Eigen::Index p = data.z().cols();
  require(beta.size() == k && alpha.size() == p, ErrorCode::Dimension,
          "information_matrix: parameter size mismatch");

  const VectorXd sigma2 = detail::variances_from_linear_predictor(data.z() * alpha);
  const MatrixXd w = data.w().dense();
  const MatrixXd b = MatrixXd::Identity(n, n) - lambda * w;
  const Eigen::PartialPivLU<MatrixXd> lu(b);
  const MatrixXd a = w * lu.inverse();  // W B^{-1}

  InformationMatrix info;
  info.k = k;
  info.p = p;
  info.full = MatrixXd::Zero(k + 1 + p, k + 1 + p);

  const MatrixXd bx = data.filtered_x(lambda);
  info.full.topLeftCorner(k, k) = bx.transpose() * sigma2.cwiseInverse().asDiagonal() * bx;

  // tr((W B^-1)^2) + tr(Omega (W B^-1)' Omega^-1 (W B^-1))
  const double tr_a2 = a.cwiseProduct(a.transpose()).sum();
  // sum_ij a_ji^2 sigma_i^2 / sigma_j^2
  const double tr_weighted =
      sigma2.cwiseInverse().dot(a.array().square().matrix() * sigma2);
  info.full(k, k) = tr_a2 + tr_weighted;

  // tr(Omega^-1 H_p W B^-1) = sum_i z_ip (W B^-1)_ii
  const VectorXd a_diag = a.diagonal();
  for (Eigen::Index q = 0; q < p; ++q) {
    const VectorXd hq = h_p_diag(data.z(), alpha, q);
    const double v = (hq.cwiseQuotient(sigma2)).dot(a_diag);
    info.full(k, k + 1 + q) = v;
    info.full(k + 1 + q, k) = v;
  }

  // alpha block, trace form 1/2 tr(Omega^-2 H_p H_q), checked against Z'Z / 2
  MatrixXd h(n, p);
  for (Eigen::Index q = 0; q < p; ++q) h.col(q) = h_p_diag(data.z(), alpha, q);
  const VectorXd inv_s4 = sigma2.array().square().inverse();
  const MatrixXd trace_form = 0.5 * h.transpose() * inv_s4.asDiagonal() * h;
  const MatrixXd ztz_half = 0.5 * data.z().transpose() * data.z();
  info.alpha_block_discrepancy = (trace_form - ztz_half).cwiseAbs().maxCoeff();
  require(info.alpha_block_discrepancy <= 1e-8 * std::max(1.0, ztz_half.cwiseAbs().maxCoeff()),
          ErrorCode::Numeric, "alpha information block: trace form disagrees with Z'Z/2");
  info.full.bottomRightCorner(p, p) = trace_form;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info.full, Eigen::EigenvaluesOnly);
  info.positive_definite = eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
  return info;
}

inline InformationMatrix information_matrix(const ModelData& data, const FitResult& fit) {
  return information_matrix(data, fit.beta, fit.alpha, fit.lambda);
}

// Inverse of the information; a pseudo-inverse when it is not positive definite.
inline MatrixXd covariance(const InformationMatrix& info) {
  if (info.positive_definite) {
    Eigen::LLT<MatrixXd> llt(info.full);
    if (llt.info() == Eigen::Success)
      return llt.solve(MatrixXd::Identity(info.full.rows(), info.full.cols()));
  }
  return info.full.completeOrthogonalDecomposition().pseudoInverse();
}

inline VectorXd standard_errors(const InformationMatrix& info) {
  return covariance(info).diagonal().cwiseMax(0.0).cwiseSqrt();
}

struct WaldRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

inline double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline WaldRow wald_row(std::string name, double estimate, double se) {
  WaldRow r{std::move(name), estimate, se, 0.0, 1.0};
  if (estimate == 0.0) return r;
  r.z = se > 0.0 ? estimate / se : std::copysign(INFINITY, estimate);
  r.p_value = two_sided_normal_p(r.z);
  return r;
}

// One row per parameter in (beta, lambda, alpha) order.
inline std::vector<WaldRow> wald_tests(const FitResult& fit, const InformationMatrix& info) {
  const VectorXd se = standard_errors(info);
  std::vector<WaldRow> rows;
  const Eigen::Index k = fit.beta.size();
  for (Eigen::Index j = 0; j < k; ++j)
    rows.push_back(wald_row("beta" + std::to_string(j), fit.beta[j], se[j]));
  rows.push_back(wald_row("lambda", fit.lambda, se[k]));
  for (Eigen::Index j = 0; j < fit.alpha.size(); ++j)
    rows.push_back(wald_row("alpha" + std::to_string(j), fit.alpha[j], se[k + 1 + j]));
  return rows;
}

// Homoscedastic baselines, parameters (beta, spatial, sigma^2). With
// A = W (I - s W)^{-1}:
//   Ho-SEM: I_bb = (BX)'(BX)/s2, I_ll = tr(A^2) + tr(A'A), I_ls2 = tr(A)/s2
//   SAR:    I_bb = X'X/s2, I_br = X'A X b/s2,
//           I_rr = tr(A^2) + tr(A'A) + |A X b|^2/s2, I_rs2 = tr(A)/s2
//   both:   I_s2s2 = n / (2 s2^2)
inline MatrixXd baseline_information(const ModelData& data, const BaselineFit& fit) {
  const Eigen::Index n = data.n();
  const Eigen::Index k = data.x().cols();
  const double s2 = fit.sigma2_pooled;
  require(s2 > 0.0, ErrorCode::Numeric, "baseline variance must be positive");
  if (fit.kind == BaselineKind::Ols) {
    MatrixXd info = MatrixXd::Zero(k + 1, k + 1);
    info.topLeftCorner(k, k) = data.x().transpose() * data.x() / s2;
    info(k, k) = static_cast<double>(n) / (2.0 * s2 * s2);
    return info;
  }
  const double s = *fit.spatial_param;
  require_lambda(s);
  const MatrixXd w = data.w().dense();
  const MatrixXd a = w * (MatrixXd::Identity(n, n) - s * w).partialPivLu().inverse();
  MatrixXd info = MatrixXd::Zero(k + 2, k + 2);
  const double tr_a2 = a.cwiseProduct(a.transpose()).sum();
  const double tr_ata = a.squaredNorm();
  if (fit.kind == BaselineKind::HoSem) {
    const MatrixXd bx = data.filtered_x(s);
    info.topLeftCorner(k, k) = bx.transpose() * bx / s2;
    info(k, k) = tr_a2 + tr_ata;
  } else {
    const VectorXd axb = a * (data.x() * fit.beta);
    info.topLeftCorner(k, k) = data.x().transpose() * data.x() / s2;
    const VectorXd cross = data.x().transpose() * axb / s2;
    info.block(0, k, k, 1) = cross;
    info.block(k, 0, 1, k) = cross.transpose();
    info(k, k) = tr_a2 + tr_ata + axb.squaredNorm() / s2;
  }
  info(k, k + 1) = info(k + 1, k) = a.trace() / s2;
  info(k + 1, k + 1) = static_cast<double>(n) / (2.0 * s2 * s2);
  return info;
}

// Standard errors ordered (beta, spatial parameter if any, sigma^2).
inline VectorXd baseline_standard_errors(const ModelData& data, const BaselineFit& fit) {
  const MatrixXd info = baseline_information(data, fit);
  const MatrixXd cov = info.completeOrthogonalDecomposition().pseudoInverse();
  return cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace hetsem
