#pragma once

// Spatial error model with heteroskedastic normal innovations:
//   y = X beta + u,  u = lambda W u + eps,  eps_i ~ N(0, exp(z_i' alpha)).
// Maximum likelihood by alternating a joint mean/variance fit on the
// spatially filtered data (B y, B X), B = I - lambda W, with maximization of
// the concentrated likelihood over lambda.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetsem/error.hpp"
#include "hetsem/hetreg.hpp"
#include "hetsem/linalg.hpp"
#include "hetsem/optimize.hpp"
#include "hetsem/weights.hpp"

namespace hetsem {

inline constexpr double kLambdaBoundary = 1e-4;

enum class LogDetMethod { Auto, Eigen, LU };

// y, X (with intercept), Z (with intercept) and W. Spatial lags W y and W X
// are computed once; filtering at any lambda is then O(n k).
class ModelData {
 public:
  ModelData(VectorXd y, MatrixXd x, MatrixXd z, WeightMatrix w, bool check_rank = true)
      : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)), w_(std::move(w)) {
    const Eigen::Index n = y_.size();
    require(x_.rows() == n && z_.rows() == n && w_.size() == n, ErrorCode::Dimension,
            "model data: y has " + std::to_string(n) + " rows, X " + std::to_string(x_.rows()) +
                ", Z " + std::to_string(z_.rows()) + ", W " + std::to_string(w_.size()));
    require(x_.cols() >= 1 && z_.cols() >= 1, ErrorCode::Dimension, "empty design matrix");
    require(y_.allFinite() && x_.allFinite() && z_.allFinite(), ErrorCode::Invalid,
            "model data contains non-finite values");
    if (check_rank) {
      require(full_column_rank(x_), ErrorCode::Numeric, "mean design X is rank-deficient");
      require(full_column_rank(z_), ErrorCode::Numeric, "variance design Z is rank-deficient");
    }
    wy_ = w_.lag(y_);
    wx_ = w_.lag(x_);
  }

  Eigen::Index n() const noexcept { return y_.size(); }
  const VectorXd& y() const noexcept { return y_; }
  const MatrixXd& x() const noexcept { return x_; }
  const MatrixXd& z() const noexcept { return z_; }
  const WeightMatrix& w() const noexcept { return w_; }
  const VectorXd& wy() const noexcept { return wy_; }
  const MatrixXd& wx() const noexcept { return wx_; }

  VectorXd filtered_y(double lambda) const { return y_ - lambda * wy_; }
  MatrixXd filtered_x(double lambda) const { return x_ - lambda * wx_; }

  // Same W and Z, different response (used by permutation-style tests).
  ModelData with_response(VectorXd y) const { return ModelData(std::move(y), x_, z_, w_, false); }

 private:
  VectorXd y_;
  MatrixXd x_;
  MatrixXd z_;
  WeightMatrix w_;
  VectorXd wy_;
  MatrixXd wx_;
};

inline void require_lambda(double lambda) {
  require(std::isfinite(lambda) && std::abs(lambda) < 1.0, ErrorCode::Invalid,
          "spatial parameter must satisfy |lambda| < 1, got " + std::to_string(lambda));
}

// ln|I - lambda W|
inline double log_det_B(const WeightMatrix& w, double lambda,
                        LogDetMethod method = LogDetMethod::Auto) {
  require_lambda(lambda);
  if (lambda == 0.0) return 0.0;
  if (method == LogDetMethod::Auto)
    method = static_cast<std::size_t>(w.size()) <= kDefaultDenseEigenThreshold ? LogDetMethod::Eigen
                                                                             : LogDetMethod::LU;
  if (method == LogDetMethod::Eigen) {
    const VectorXd& ev = w.eigenvalues();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      const double f = 1.0 - lambda * ev[i];
      require(f > 0.0, ErrorCode::Numeric, "I - lambda W is singular or has negative determinant");
      sum += std::log(f);
    }
    return sum;
  }
  Eigen::SparseMatrix<double> b(w.size(), w.size());
  b.setIdentity();
  b -= lambda * Eigen::SparseMatrix<double>(w.matrix());
  b.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(b);
  require(lu.info() == Eigen::Success, ErrorCode::Numeric, "LU factorization of I - lambda W failed");
  const double logabs = lu.logAbsDeterminant();
  require(std::isfinite(logabs) && lu.signDeterminant() > 0, ErrorCode::Numeric,
          "I - lambda W is singular or has negative determinant");
  return logabs;
}

// tr(B^{-1} W) = -d/dlambda ln|B|
inline double trace_binv_w(const WeightMatrix& w, double lambda) {
  require_lambda(lambda);
  if (static_cast<std::size_t>(w.size()) <= kDefaultDenseEigenThreshold) {
    const VectorXd& ev = w.eigenvalues();
    return (ev.array() / (1.0 - lambda * ev.array())).sum();
  }
  const MatrixXd b = MatrixXd::Identity(w.size(), w.size()) - lambda * w.dense();
  return b.partialPivLu().solve(w.dense()).trace();
}

// ln|Omega| for diagonal Omega, summed in logs so large n never overflows.
inline double log_det_omega(const VectorXd& sigma2) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < sigma2.size(); ++i) {
    require(sigma2[i] > 0.0 && std::isfinite(sigma2[i]), ErrorCode::Numeric,
            "non-positive variance at observation " + std::to_string(i));
    sum += std::log(sigma2[i]);
  }
  return sum;
}

inline double loglik_hetsem(const ModelData& data, const VectorXd& beta, const VectorXd& alpha,
                            double lambda) {
  require(beta.size() == data.x().cols() && alpha.size() == data.z().cols(), ErrorCode::Dimension,
          "loglik_hetsem: parameter size mismatch");
  require_lambda(lambda);
  const VectorXd eta = data.z() * alpha;
  const VectorXd sigma2 = detail::variances_from_linear_predictor(eta);
  const VectorXd e = data.filtered_y(lambda) - data.filtered_x(lambda) * beta;
  const double n = static_cast<double>(data.n());
  return -0.5 * n * kLog2Pi - 0.5 * log_det_omega(sigma2) + log_det_B(data.w(), lambda) -
         0.5 * (e.array().square() / sigma2.array()).sum();
}

// Closed-form GLS: (X'B' Omega^-1 B X)^-1 X'B' Omega^-1 B y
inline VectorXd beta_gls(const ModelData& data, double lambda, const VectorXd& sigma2) {
  require_lambda(lambda);
  require(sigma2.size() == data.n(), ErrorCode::Dimension, "beta_gls: sigma2 size mismatch");
  return weighted_least_squares(data.filtered_x(lambda), data.filtered_y(lambda),
                                sigma2.cwiseInverse());
}

// Likelihood with Omega fixed at sigma2 and beta replaced by beta_gls(lambda).
inline double concentrated_loglik(const ModelData& data, double lambda, const VectorXd& sigma2,
                                  double log_det_sigma2) {
  const VectorXd by = data.filtered_y(lambda);
  const MatrixXd bx = data.filtered_x(lambda);
  const VectorXd winv = sigma2.cwiseInverse();
  const VectorXd beta = weighted_least_squares(bx, by, winv);
  const VectorXd e = by - bx * beta;
  const double n = static_cast<double>(data.n());
  return -0.5 * n * kLog2Pi - 0.5 * log_det_sigma2 + log_det_B(data.w(), lambda) -
         0.5 * e.dot(winv.asDiagonal() * e);
}

inline double concentrated_loglik(const ModelData& data, double lambda, const VectorXd& sigma2) {
  require_lambda(lambda);
  require(sigma2.size() == data.n(), ErrorCode::Dimension,
          "concentrated_loglik: sigma2 size mismatch");
  return concentrated_loglik(data, lambda, sigma2, log_det_omega(sigma2));
}

struct LambdaSearch {
  double lower = -1.0 + kLambdaBoundary;
  double upper = 1.0 - kLambdaBoundary;
  int prescan_points = kDefaultPrescanPoints;
};

inline Maximum1D maximize_lambda(const ModelData& data, const VectorXd& sigma2,
                                 const LambdaSearch& search = {}) {
  require(search.lower > -1.0 && search.upper < 1.0 && search.lower < search.upper,
          ErrorCode::Invalid, "lambda search interval must lie inside (-1, 1)");
  require(sigma2.size() == data.n(), ErrorCode::Dimension, "maximize_lambda: sigma2 size mismatch");
  const double ldo = log_det_omega(sigma2);
  return maximize_bounded(
      [&](double lambda) { return concentrated_loglik(data, lambda, sigma2, ldo); }, search.lower,
      search.upper, search.prescan_points);
}

struct FitOptions {
  double tol_lambda = 1e-6;
  int max_outer = 50;
  JointFitOptions joint{};
  LambdaSearch search{};
  // Pins lambda instead of estimating it (reduction checks).
  std::optional<double> fixed_lambda;
};

struct FitResult {
  VectorXd beta;
  VectorXd alpha;  // log-variance scale
  double lambda = 0.0;
  VectorXd sigma2;
  double loglik = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  bool joint_converged = false;
  std::vector<double> lambda_trace;
  std::vector<double> loglik_trace;  // full likelihood after every block update
};

inline FitResult fit(const ModelData& data, const FitOptions& opt = {}) {
  require(opt.max_outer >= 1 && opt.tol_lambda > 0.0, ErrorCode::Invalid, "fit: bad options");
  require(data.w().row_standardized(), ErrorCode::Invalid,
          "fit requires a row-standardized weight matrix");
  FitResult out;

  // (1) joint mean/variance fit ignoring the spatial filter
  JointFit joint = fit_joint(data.y(), data.x(), data.z(), opt.joint);

  if (opt.fixed_lambda) {
    const double lambda = *opt.fixed_lambda;
    require_lambda(lambda);
    if (lambda != 0.0)
      joint = fit_joint(data.filtered_y(lambda), data.filtered_x(lambda), data.z(), opt.joint);
    out.beta = joint.beta;
    out.alpha = joint.alpha;
    out.sigma2 = joint.sigma2;
    out.lambda = lambda;
    out.loglik = joint.loglik + log_det_B(data.w(), lambda);
    out.converged = out.joint_converged = joint.converged;
    out.lambda_trace.push_back(lambda);
    out.loglik_trace.push_back(out.loglik);
    return out;
  }

  // (2-3) concentrated likelihood at the first variance estimate
  Maximum1D best = maximize_lambda(data, joint.sigma2, opt.search);
  double lambda = best.argmax;
  out.lambda_trace.push_back(lambda);
  out.loglik_trace.push_back(best.value);

  VectorXd alpha = joint.alpha;
  for (int outer = 1; outer <= opt.max_outer; ++outer) {
    out.outer_iterations = outer;
    // (4-5) joint fit on the filtered data
    joint = fit_joint(data.filtered_y(lambda), data.filtered_x(lambda), data.z(), opt.joint, alpha,
                      false);
    alpha = joint.alpha;
    const double ll_joint = joint.loglik + log_det_B(data.w(), lambda);
    out.loglik_trace.push_back(ll_joint);

    // (6) re-maximize over lambda with the new variances
    best = maximize_lambda(data, joint.sigma2, opt.search);
    double next = best.argmax;
    double ll_next = best.value;
    const double ll_stay = concentrated_loglik(data, lambda, joint.sigma2);
    if (ll_next < ll_stay) {
      next = lambda;
      ll_next = ll_stay;
    }
    out.lambda_trace.push_back(next);
    out.loglik_trace.push_back(ll_next);

    // (7) stop once lambda has settled
    const bool settled = std::abs(next - lambda) < opt.tol_lambda;
    lambda = next;
    if (settled) {
      out.converged = true;
      break;
    }
  }

  // (8) final joint fit at the converged lambda
  joint = fit_joint(data.filtered_y(lambda), data.filtered_x(lambda), data.z(), opt.joint, alpha,
                    false);
  out.beta = joint.beta;
  out.alpha = joint.alpha;
  out.sigma2 = joint.sigma2;
  out.lambda = lambda;
  out.loglik = joint.loglik + log_det_B(data.w(), lambda);
  out.joint_converged = joint.converged;
  out.converged = out.converged && joint.converged;
  out.loglik_trace.push_back(out.loglik);
  return out;
}

// Innovation residuals B (y - X beta).
inline VectorXd innovation_residuals(const ModelData& data, const VectorXd& beta, double lambda) {
  return data.filtered_y(lambda) - data.filtered_x(lambda) * beta;
}

// Analytic gradient of loglik_hetsem, ordered (beta, lambda, alpha).
inline VectorXd score_hetsem(const ModelData& data, const VectorXd& beta, const VectorXd& alpha,
                             double lambda) {
  require_lambda(lambda);
  const Eigen::Index k = data.x().cols();
  const Eigen::Index p = data.z().cols();
  const VectorXd sigma2 = detail::variances_from_linear_predictor(data.z() * alpha);
  const VectorXd u = data.y() - data.x() * beta;
  const VectorXd e = u - lambda * data.w().lag(u);
  const VectorXd we = e.cwiseQuotient(sigma2);
  VectorXd g(k + 1 + p);
  g.head(k) = data.filtered_x(lambda).transpose() * we;
  g[k] = -trace_binv_w(data.w(), lambda) + we.dot(data.w().lag(u));
  const VectorXd d = e.array().square() / sigma2.array();
  g.tail(p) = 0.5 * data.z().transpose() * (d.array() - 1.0).matrix();
  return g;
}

}  // namespace hetsem
