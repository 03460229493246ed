#pragma once

// Heteroskedastic normal regression with a log-linear variance:
//   y_i ~ N(x_i' beta, exp(z_i' alpha)).
// beta is refreshed by weighted least squares, alpha by Fisher scoring, and
// the two steps alternate until the log-likelihood settles.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>

#include "hetsem/error.hpp"
#include "hetsem/linalg.hpp"

namespace hetsem {

struct JointFit {
  VectorXd beta;
  VectorXd alpha;   // log-variance coefficients
  VectorXd sigma2;  // exp(Z alpha)
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct JointFitOptions {
  double tol = 1e-8;         // relative log-likelihood change
  double score_tol = 1e-6;   // max |Z'(d - 1)| at convergence
  int max_iter = 100;
  int max_halvings = 10;
};

namespace detail {

// exp(eta) with a range check; past +-700 the variance over/underflows.
inline VectorXd variances_from_linear_predictor(const VectorXd& eta) {
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    require(std::isfinite(eta[i]) && std::abs(eta[i]) < 700.0, ErrorCode::Numeric,
            "variance predictor exp(z'alpha) overflows at observation " + std::to_string(i) +
                "; rescale the variance covariates Z");
  return eta.array().exp().matrix();
}

// log-likelihood from residuals and the log-variance predictor
inline double hetnormal_loglik(const VectorXd& resid, const VectorXd& eta) {
  const double n = static_cast<double>(resid.size());
  return -0.5 * n * kLog2Pi - 0.5 * eta.sum() -
         0.5 * (resid.array().square() * (-eta.array()).exp()).sum();
}

}  // namespace detail

inline double loglik_hetnormal(const VectorXd& y, const MatrixXd& x, const MatrixXd& z,
                               const VectorXd& beta, const VectorXd& alpha) {
  require(x.rows() == y.size() && z.rows() == y.size() && x.cols() == beta.size() &&
              z.cols() == alpha.size(),
          ErrorCode::Dimension, "loglik_hetnormal: dimension mismatch");
  return detail::hetnormal_loglik(y - x * beta, z * alpha);
}

inline void validate_joint_design(const VectorXd& y, const MatrixXd& x, const MatrixXd& z) {
  require(x.rows() == y.size() && z.rows() == y.size(), ErrorCode::Dimension,
          "fit_joint: y, X and Z must have the same number of rows");
  require(y.size() > x.cols() && y.size() > z.cols(), ErrorCode::Dimension,
          "fit_joint: need more observations than mean or variance parameters");
  require(full_column_rank(x), ErrorCode::Numeric, "mean design X is rank-deficient");
  require(full_column_rank(z), ErrorCode::Numeric, "variance design Z is rank-deficient");
}

// Starting log-variance coefficients: OLS of ln(max(e^2, floor)) on Z.
inline VectorXd initial_alpha(const VectorXd& y, const MatrixXd& x, const MatrixXd& z) {
  const VectorXd beta = ordinary_least_squares(x, y);
  const VectorXd resid = y - x * beta;
  const double mean = y.mean();
  const double var_y = (y.array() - mean).square().sum() / static_cast<double>(y.size());
  const double floor = std::max(1e-10 * var_y, std::numeric_limits<double>::min());
  const VectorXd log_e2 = resid.array().square().max(floor).log().matrix();
  return ordinary_least_squares(z, log_e2);
}

// `start_alpha` warm-starts the variance coefficients (used by the outer
// spatial iteration so successive joint fits never lose likelihood).
inline JointFit fit_joint(const VectorXd& y, const MatrixXd& x, const MatrixXd& z,
                          const JointFitOptions& opt = {},
                          const std::optional<VectorXd>& start_alpha = std::nullopt,
                          bool validate = true) {
  if (validate) validate_joint_design(y, x, z);
  require(opt.max_iter >= 1, ErrorCode::Invalid, "fit_joint: max_iter must be positive");

  const MatrixXd ztz = z.transpose() * z;
  const Eigen::LLT<MatrixXd> ztz_llt(ztz);

  JointFit fit;
  fit.alpha = start_alpha ? *start_alpha : initial_alpha(y, x, z);
  require(fit.alpha.size() == z.cols(), ErrorCode::Dimension, "fit_joint: bad start alpha size");

  VectorXd eta = z * fit.alpha;
  VectorXd sigma2 = detail::variances_from_linear_predictor(eta);
  double prev = -std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    fit.iterations = iter;
    fit.beta = weighted_least_squares(x, y, sigma2.cwiseInverse());
    const VectorXd resid = y - x * fit.beta;
    double current = detail::hetnormal_loglik(resid, eta);

    const VectorXd d = resid.array().square() / sigma2.array();
    const VectorXd score = z.transpose() * (d.array() - 1.0).matrix();  // 2 x dl/dalpha
    const bool small_change =
        std::isfinite(prev) && std::abs(current - prev) <= opt.tol * std::abs(prev);
    if (small_change && score.cwiseAbs().maxCoeff() <= opt.score_tol) {
      fit.converged = true;
      break;
    }
    prev = current;

    // Fisher scoring: info = Z'Z / 2, score = Z'(d - 1) / 2.
    VectorXd step = ztz_llt.solve(score);
    bool improved = false;
    for (int h = 0; h <= opt.max_halvings; ++h) {
      const VectorXd trial = fit.alpha + step;
      const VectorXd trial_eta = z * trial;
      if (trial_eta.cwiseAbs().maxCoeff() < 700.0) {
        const double ll = detail::hetnormal_loglik(resid, trial_eta);
        // slack: near the optimum the change is below the rounding of ll itself
        if (ll >= current - 1e-12 * (1.0 + std::abs(current))) {
          fit.alpha = trial;
          eta = trial_eta;
          improved = true;
          break;
        }
      }
      step *= 0.5;
    }
    sigma2 = detail::variances_from_linear_predictor(eta);
    if (!improved) {
      // No ascent along the scoring direction: numerically at the optimum.
      fit.converged = small_change || score.cwiseAbs().maxCoeff() <= opt.score_tol;
      break;
    }
  }

  fit.sigma2 = sigma2;
  fit.beta = weighted_least_squares(x, y, sigma2.cwiseInverse());
  fit.loglik = detail::hetnormal_loglik(y - x * fit.beta, eta);
  return fit;
}

}  // namespace hetsem
