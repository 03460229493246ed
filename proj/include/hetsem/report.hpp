#pragma once

// Versioned fit report: coefficient table with standard errors, likelihood,
// innovation MSE and convergence record. Serialized as JSON.

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetsem/baselines.hpp"
#include "hetsem/error.hpp"
#include "hetsem/hetsem.hpp"
#include "hetsem/inference.hpp"
#include "hetsem/montecarlo.hpp"

namespace hetsem {

inline constexpr int kReportSchema = 1;

enum class VarianceScale { Var, Sd };

inline std::string_view to_string(VarianceScale s) { return s == VarianceScale::Var ? "var" : "sd"; }

inline VarianceScale parse_variance_scale(std::string_view s) {
  if (s == "var") return VarianceScale::Var;
  if (s == "sd") return VarianceScale::Sd;
  fail(ErrorCode::Invalid, "variance scale must be 'var' or 'sd', got '" + std::string(s) + "'");
}

struct CoefficientRow {
  std::string block;  // "mean", "spatial" or "variance"
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;

  bool operator==(const CoefficientRow&) const = default;
};

struct FitReport {
  int schema = kReportSchema;
  std::string model;
  std::string variance_scale = "var";
  long long n = 0;
  std::string y_column;
  std::vector<std::string> x_columns;
  std::vector<std::string> z_columns;
  std::vector<CoefficientRow> coefficients;
  double loglik = 0.0;
  double mse = 0.0;
  bool converged = false;
  int outer_iterations = 0;
  std::vector<double> lambda_trace;
  std::vector<double> residuals;

  bool operator==(const FitReport&) const = default;
};

inline void to_json(nlohmann::json& j, const CoefficientRow& r) {
  j = nlohmann::json{{"block", r.block}, {"name", r.name}, {"estimate", r.estimate},
                     {"se", r.se},       {"z", r.z},       {"p_value", r.p_value}};
}

inline void from_json(const nlohmann::json& j, CoefficientRow& r) {
  j.at("block").get_to(r.block);
  j.at("name").get_to(r.name);
  j.at("estimate").get_to(r.estimate);
  j.at("se").get_to(r.se);
  j.at("z").get_to(r.z);
  j.at("p_value").get_to(r.p_value);
}

inline void to_json(nlohmann::json& j, const FitReport& r) {
  j = nlohmann::json{{"schema", r.schema},
                     {"model", r.model},
                     {"variance_scale", r.variance_scale},
                     {"n", r.n},
                     {"columns", {{"y", r.y_column}, {"x", r.x_columns}, {"z", r.z_columns}}},
                     {"coefficients", r.coefficients},
                     {"loglik", r.loglik},
                     {"mse", r.mse},
                     {"converged", r.converged},
                     {"outer_iterations", r.outer_iterations},
                     {"lambda_trace", r.lambda_trace},
                     {"residuals", r.residuals}};
}

inline void from_json(const nlohmann::json& j, FitReport& r) {
  j.at("schema").get_to(r.schema);
  require(r.schema == kReportSchema, ErrorCode::Parse,
          "unsupported report schema " + std::to_string(r.schema));
  j.at("model").get_to(r.model);
  j.at("variance_scale").get_to(r.variance_scale);
  j.at("n").get_to(r.n);
  const auto& cols = j.at("columns");
  cols.at("y").get_to(r.y_column);
  cols.at("x").get_to(r.x_columns);
  cols.at("z").get_to(r.z_columns);
  j.at("coefficients").get_to(r.coefficients);
  j.at("loglik").get_to(r.loglik);
  j.at("mse").get_to(r.mse);
  j.at("converged").get_to(r.converged);
  j.at("outer_iterations").get_to(r.outer_iterations);
  j.at("lambda_trace").get_to(r.lambda_trace);
  j.at("residuals").get_to(r.residuals);
}

inline std::string serialize(const FitReport& r) { return nlohmann::json(r).dump(2); }

inline FitReport parse_report(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<FitReport>();
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::Parse, std::string("fit report: ") + ex.what());
  }
}

struct FitRequest {
  Estimator estimator = Estimator::Proposed;
  VarianceScale scale = VarianceScale::Var;
  std::string y_column = "y";
  std::vector<std::string> x_columns;  // without intercept
  std::vector<std::string> z_columns;  // without intercept
  FitOptions options{};
};

namespace detail {

inline std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::string coef_name(const std::vector<std::string>& cols, Eigen::Index j) {
  return j == 0 ? std::string("(intercept)") : cols[static_cast<std::size_t>(j - 1)];
}

}  // namespace detail

// Fits the requested estimator and assembles the report, including
// standard errors from the expected information.
inline FitReport make_fit_report(const ModelData& data, const FitRequest& req) {
  FitReport r;
  r.model = std::string(to_string(req.estimator));
  r.variance_scale = std::string(to_string(req.scale));
  r.n = data.n();
  r.y_column = req.y_column;
  r.x_columns = req.x_columns;
  r.z_columns = req.z_columns;
  require(static_cast<Eigen::Index>(req.x_columns.size()) + 1 == data.x().cols(),
          ErrorCode::Dimension, "report: X column names do not match the design");

  auto add = [&r](std::string block, std::string name, double est, double se) {
    const WaldRow w = wald_row(name, est, se);
    r.coefficients.push_back({std::move(block), std::move(name), est, se, w.z, w.p_value});
  };

  if (req.estimator == Estimator::Proposed) {
    require(static_cast<Eigen::Index>(req.z_columns.size()) + 1 == data.z().cols(),
            ErrorCode::Dimension, "report: Z column names do not match the design");
    const FitResult f = fit(data, req.options);
    require(f.beta.allFinite() && f.alpha.allFinite(), ErrorCode::Convergence,
            "proposed fit produced non-finite estimates");
    const InformationMatrix info = information_matrix(data, f);
    const VectorXd se = standard_errors(info);
    const Eigen::Index k = f.beta.size();
    for (Eigen::Index j = 0; j < k; ++j)
      add("mean", detail::coef_name(req.x_columns, j), f.beta[j], se[j]);
    add("spatial", "lambda", f.lambda, se[k]);
    const double factor = req.scale == VarianceScale::Sd ? 0.5 : 1.0;
    for (Eigen::Index j = 0; j < f.alpha.size(); ++j)
      add("variance", detail::coef_name(req.z_columns, j), factor * f.alpha[j],
          factor * se[k + 1 + j]);
    const VectorXd resid = innovation_residuals(data, f.beta, f.lambda);
    r.residuals = detail::to_std(resid);
    r.mse = resid.squaredNorm() / static_cast<double>(data.n());
    r.loglik = f.loglik;
    r.converged = f.converged;
    r.outer_iterations = f.outer_iterations;
    r.lambda_trace = f.lambda_trace;
    return r;
  }

  BaselineFit b;
  switch (req.estimator) {
    case Estimator::HoSem: b = fit_sem_homoscedastic(data); break;
    case Estimator::Sar: b = fit_sar(data); break;
    default: b = fit_ols(data.y(), data.x()); break;
  }
  const VectorXd se = baseline_standard_errors(data, b);
  for (Eigen::Index j = 0; j < b.beta.size(); ++j)
    add("mean", detail::coef_name(req.x_columns, j), b.beta[j], se[j]);
  if (b.spatial_param)
    add("spatial", b.kind == BaselineKind::Sar ? "rho" : "lambda", *b.spatial_param,
        se[b.beta.size()]);
  // pooled log-variance so the table has the same blocks as the proposed
  // model; se by the delta method, se(ln s2) = se(s2) / s2
  const double factor = req.scale == VarianceScale::Sd ? 0.5 : 1.0;
  add("variance", "(intercept)", factor * std::log(b.sigma2_pooled),
      factor * se[se.size() - 1] / b.sigma2_pooled);
  r.z_columns.clear();
  r.residuals = detail::to_std(b.residuals);
  r.mse = b.residuals.squaredNorm() / static_cast<double>(data.n());
  r.loglik = b.loglik;
  r.converged = b.polished;
  return r;
}

inline const CoefficientRow& find_coefficient(const FitReport& r, std::string_view block,
                                              std::string_view name) {
  for (const auto& c : r.coefficients)
    if (c.block == block && c.name == name) return c;
  fail(ErrorCode::Invalid,
       "report has no coefficient " + std::string(block) + "/" + std::string(name));
}

inline void print_report(std::ostream& os, const FitReport& r) {
  os << "model: " << r.model << "   n = " << r.n << "   response: " << r.y_column << "\n";
  os << std::left << std::setw(10) << "block" << std::setw(18) << "term" << std::right
     << std::setw(13) << "estimate" << std::setw(13) << "std.err" << std::setw(10) << "z"
     << std::setw(12) << "p" << "\n";
  for (const auto& c : r.coefficients) {
    os << std::left << std::setw(10) << c.block << std::setw(18) << c.name << std::right
       << std::setw(13) << std::setprecision(6) << c.estimate << std::setw(13) << c.se
       << std::setw(10) << std::setprecision(4) << c.z << std::setw(12) << c.p_value << "\n";
  }
  os << std::setprecision(6) << "log-likelihood: " << r.loglik << "   MSE: " << r.mse
     << "   converged: " << (r.converged ? "yes" : "no");
  if (r.model == "proposed") os << "   outer iterations: " << r.outer_iterations;
  os << "\nvariance equation scale: " << (r.variance_scale == "sd" ? "ln(sigma)" : "ln(sigma^2)")
     << "\n";
}

}  // namespace hetsem
