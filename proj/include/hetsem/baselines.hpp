#pragma once

// Homoscedastic comparison estimators: SEM and SAR by profile maximum
// likelihood, and plain OLS.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string_view>

#include "hetsem/error.hpp"
#include "hetsem/hetsem.hpp"
#include "hetsem/linalg.hpp"
#include "hetsem/optimize.hpp"
#include "hetsem/weights.hpp"

namespace hetsem {

enum class BaselineKind { HoSem, Sar, Ols };

inline std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::HoSem: return "ho-sem";
    case BaselineKind::Sar: return "sar";
    case BaselineKind::Ols: return "ols";
  }
  return "?";
}

struct BaselineFit {
  BaselineKind kind = BaselineKind::Ols;
  VectorXd beta;
  std::optional<double> spatial_param;  // lambda (Ho-SEM) or rho (SAR)
  double sigma2_pooled = 0.0;           // ML variance, e'e / n
  double loglik = 0.0;
  VectorXd residuals;  // innovations for Ho-SEM and SAR, raw residuals for OLS
  bool polished = true;
};

struct BaselineOptions {
  LambdaSearch search{};
  std::optional<double> fixed_spatial_param;
};

namespace detail {

struct ProfilePoint {
  VectorXd beta;
  VectorXd resid;
  double sigma2 = 0.0;
  double loglik = 0.0;
};

inline ProfilePoint homoscedastic_profile(const VectorXd& y, const MatrixXd& x,
                                          double log_det) {
  ProfilePoint p;
  p.beta = ordinary_least_squares(x, y);
  p.resid = y - x * p.beta;
  const double n = static_cast<double>(y.size());
  p.sigma2 = p.resid.squaredNorm() / n;
  p.loglik = -0.5 * n * (kLog2Pi + 1.0) - 0.5 * n * std::log(p.sigma2) + log_det;
  return p;
}

template <typename Profile>
BaselineFit profile_fit(BaselineKind kind, Profile&& profile, const BaselineOptions& opt) {
  BaselineFit out;
  out.kind = kind;
  double param = 0.0;
  if (opt.fixed_spatial_param) {
    param = *opt.fixed_spatial_param;
    require_lambda(param);
  } else {
    const Maximum1D best = maximize_bounded([&](double s) { return profile(s).loglik; },
                                            opt.search.lower, opt.search.upper,
                                            opt.search.prescan_points);
    param = best.argmax;
    out.polished = best.polished;
  }
  ProfilePoint p = profile(param);
  out.beta = std::move(p.beta);
  out.residuals = std::move(p.resid);
  out.sigma2_pooled = p.sigma2;
  out.loglik = p.loglik;
  out.spatial_param = param;
  return out;
}

}  // namespace detail

inline BaselineFit fit_sem_homoscedastic(const ModelData& data, const BaselineOptions& opt = {}) {
  return detail::profile_fit(
      BaselineKind::HoSem,
      [&](double lambda) {
        return detail::homoscedastic_profile(data.filtered_y(lambda), data.filtered_x(lambda),
                                             log_det_B(data.w(), lambda));
      },
      opt);
}

inline BaselineFit fit_sem_homoscedastic(const VectorXd& y, const MatrixXd& x,
                                         const WeightMatrix& w, const BaselineOptions& opt = {}) {
  const ModelData data(y, x, MatrixXd::Ones(y.size(), 1), w);
  return fit_sem_homoscedastic(data, opt);
}

// y = rho W y + X beta + eps
inline BaselineFit fit_sar(const ModelData& data, const BaselineOptions& opt = {}) {
  return detail::profile_fit(
      BaselineKind::Sar,
      [&](double rho) {
        return detail::homoscedastic_profile(data.filtered_y(rho), data.x(),
                                             log_det_B(data.w(), rho));
      },
      opt);
}

inline BaselineFit fit_sar(const VectorXd& y, const MatrixXd& x, const WeightMatrix& w,
                           const BaselineOptions& opt = {}) {
  const ModelData data(y, x, MatrixXd::Ones(y.size(), 1), w);
  return fit_sar(data, opt);
}

inline BaselineFit fit_ols(const VectorXd& y, const MatrixXd& x) {
  require(x.rows() == y.size(), ErrorCode::Dimension, "fit_ols: size mismatch");
  require(y.size() > x.cols(), ErrorCode::Dimension, "fit_ols: need more rows than columns");
  require(full_column_rank(x), ErrorCode::Numeric, "fit_ols: design is rank-deficient");
  const detail::ProfilePoint p = detail::homoscedastic_profile(y, x, 0.0);
  BaselineFit out;
  out.kind = BaselineKind::Ols;
  out.beta = p.beta;
  out.residuals = p.resid;
  out.sigma2_pooled = p.sigma2;
  out.loglik = p.loglik;
  return out;
}

}  // namespace hetsem
