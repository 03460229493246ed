#pragma once

// Simulation harness: heteroskedastic SEM data on rook grids, replicated fits
// of the selected estimators, and per-parameter summaries.
//
// DGP:  X = [1, x1, x2], Z = [1, x2, x3], x1 ~ N(0,1), x2 ~ N(2,1), x3 ~ U(0,1),
//       sigma_i^2 = exp(z_i' alpha), eps_i ~ N(0, sigma_i^2), y = X beta + B^{-1} eps.
// Covariates are redrawn for every replicate.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hetsem/baselines.hpp"
#include "hetsem/error.hpp"
#include "hetsem/hetsem.hpp"
#include "hetsem/weights.hpp"

namespace hetsem {

enum class Estimator { Proposed, HoSem, Sar, Ols };

inline constexpr Estimator kAllEstimators[] = {Estimator::Proposed, Estimator::HoSem,
                                               Estimator::Sar, Estimator::Ols};

inline std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Proposed: return "proposed";
    case Estimator::HoSem: return "ho-sem";
    case Estimator::Sar: return "sar";
    case Estimator::Ols: return "ols";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view s) {
  for (Estimator e : kAllEstimators)
    if (to_string(e) == s) return e;
  fail(ErrorCode::Invalid, "unknown estimator '" + std::string(s) +
                               "' (expected proposed, ho-sem, sar or ols)");
}

struct SimConfig {
  Eigen::Index grid_rows = 12;
  Eigen::Index grid_cols = 12;
  VectorXd beta_true = (VectorXd(3) << 1.0, -1.0, 0.5).finished();
  VectorXd alpha_true = (VectorXd(3) << 0.0, -1.0, 1.0).finished();
  double lambda_true = 0.5;
  int replications = 100;
  std::uint64_t seed = 1;
  std::vector<Estimator> estimators{Estimator::Proposed};

  Eigen::Index n() const { return grid_rows * grid_cols; }
};

inline void validate(const SimConfig& c) {
  require(c.grid_rows >= 1 && c.grid_cols >= 1 && c.n() >= 4, ErrorCode::Invalid,
          "grid: need at least 4 cells");
  require(c.replications >= 1, ErrorCode::Invalid, "replications: must be at least 1");
  require(std::isfinite(c.lambda_true) && std::abs(c.lambda_true) < 1.0, ErrorCode::Invalid,
          "lambda: must satisfy |lambda| < 1");
  require(c.beta_true.size() == 3, ErrorCode::Invalid, "beta: expected 3 values (b0, b1, b2)");
  require(c.alpha_true.size() == 3, ErrorCode::Invalid, "alpha: expected 3 values (a0, a1, a2)");
  require(!c.estimators.empty(), ErrorCode::Invalid, "estimators: select at least one");
}

// Counter-style stream: one engine per (seed, replicate) pair.
inline std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

// Row-standardized grid W and a factorization of B = I - lambda W, shared by
// every replicate of a configuration.
class SimulationDesign {
 public:
  explicit SimulationDesign(SimConfig config)
      : config_(std::move(config)),
        w_(row_standardize(build_rook_grid(config_.grid_rows, config_.grid_cols))) {
    validate(config_);
    Eigen::SparseMatrix<double> b(w_.size(), w_.size());
    b.setIdentity();
    b -= config_.lambda_true * Eigen::SparseMatrix<double>(w_.matrix());
    b.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(b);
    require(lu_->info() == Eigen::Success, ErrorCode::Numeric, "cannot factor I - lambda W");
  }

  const SimConfig& config() const noexcept { return config_; }
  const WeightMatrix& w() const noexcept { return w_; }
  VectorXd solve_b(const VectorXd& eps) const { return lu_->solve(eps); }

 private:
  SimConfig config_;
  WeightMatrix w_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

struct SimulatedSample {
  ModelData data;
  VectorXd sigma2;  // true innovation variances
};

inline SimulatedSample simulate_replicate(const SimulationDesign& design,
                                          std::uint64_t replicate) {
  const SimConfig& c = design.config();
  const Eigen::Index n = c.n();
  auto rng = replicate_engine(c.seed, replicate);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  MatrixXd x(n, 3);
  MatrixXd z(n, 3);
  x.col(0).setOnes();
  z.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) x(i, 1) = std_normal(rng);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 2) = 2.0 + std_normal(rng);
  z.col(1) = x.col(2);
  for (Eigen::Index i = 0; i < n; ++i) z(i, 2) = unit(rng);

  const VectorXd sigma2 = (z * c.alpha_true).array().exp().matrix();
  VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = std::sqrt(sigma2[i]) * std_normal(rng);
  VectorXd y = x * c.beta_true + design.solve_b(eps);
  return {ModelData(std::move(y), std::move(x), std::move(z), design.w(), false), sigma2};
}

inline ModelData generate_sample(const SimulationDesign& design, std::uint64_t replicate) {
  return simulate_replicate(design, replicate).data;
}

inline ModelData generate_sample(const SimConfig& config, std::uint64_t replicate) {
  return generate_sample(SimulationDesign(config), replicate);
}

// max_i | -lambda_hat / sigma_hat_i + lambda / sigma_i |
inline double bias_bound(double lambda_hat, const VectorXd& sigma_hat, double lambda,
                         const VectorXd& sigma) {
  require(sigma_hat.size() == sigma.size(), ErrorCode::Dimension, "bias_bound: size mismatch");
  return (-lambda_hat / sigma_hat.array() + lambda / sigma.array()).abs().maxCoeff();
}

inline double bias_bound(const FitResult& fit, double lambda_true, const VectorXd& sigma2_true) {
  return bias_bound(fit.lambda, fit.sigma2.cwiseSqrt(), lambda_true, sigma2_true.cwiseSqrt());
}

inline std::vector<std::string> parameter_names(Estimator e) {
  std::vector<std::string> names{"beta0", "beta1", "beta2"};
  switch (e) {
    case Estimator::Proposed:
      names.insert(names.end(), {"lambda", "alpha0", "alpha1", "alpha2"});
      break;
    case Estimator::HoSem: names.emplace_back("lambda"); break;
    case Estimator::Sar: names.emplace_back("rho"); break;
    case Estimator::Ols: break;
  }
  return names;
}

struct EstimateRecord {
  Estimator estimator = Estimator::Proposed;
  int replicate = 0;
  bool converged = false;
  std::vector<double> params;  // ordered as parameter_names(estimator)
  double bias_bound = 0.0;     // proposed only
  std::vector<double> lambda_trace;  // proposed only
  std::string error;
};

inline EstimateRecord run_estimator(Estimator e, const SimulatedSample& sample, int replicate,
                                    double lambda_true) {
  EstimateRecord rec;
  rec.estimator = e;
  rec.replicate = replicate;
  try {
    const ModelData& d = sample.data;
    auto push_beta = [&rec](const VectorXd& b) {
      for (Eigen::Index j = 0; j < b.size(); ++j) rec.params.push_back(b[j]);
    };
    switch (e) {
      case Estimator::Proposed: {
        const FitResult f = fit(d);
        push_beta(f.beta);
        rec.params.push_back(f.lambda);
        for (Eigen::Index j = 0; j < f.alpha.size(); ++j) rec.params.push_back(f.alpha[j]);
        rec.converged = f.converged;
        rec.bias_bound = bias_bound(f, lambda_true, sample.sigma2);
        rec.lambda_trace = f.lambda_trace;
        break;
      }
      case Estimator::HoSem: {
        const BaselineFit f = fit_sem_homoscedastic(d);
        push_beta(f.beta);
        rec.params.push_back(*f.spatial_param);
        rec.converged = f.polished;
        break;
      }
      case Estimator::Sar: {
        const BaselineFit f = fit_sar(d);
        push_beta(f.beta);
        rec.params.push_back(*f.spatial_param);
        rec.converged = f.polished;
        break;
      }
      case Estimator::Ols: {
        push_beta(fit_ols(d.y(), d.x()).beta);
        rec.converged = true;
        break;
      }
    }
  } catch (const std::exception& ex) {
    rec.converged = false;
    rec.error = ex.what();
  }
  return rec;
}

inline unsigned worker_count(int requested = 0) {
  unsigned n = requested > 0 ? static_cast<unsigned>(requested)
                             : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HETSEM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

struct McResult {
  SimConfig config;
  std::vector<EstimateRecord> records;  // replicate-major, estimator order as configured
};

// Replicates run on a worker pool; results land in fixed slots, so the output
// does not depend on the number of workers.
inline McResult run_monte_carlo(const SimConfig& config, int threads = 0) {
  const SimulationDesign design(config);
  design.w().eigenvalues();  // populate the shared spectrum before workers start
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t per = config.estimators.size();
  McResult out;
  out.config = config;
  out.records.resize(reps * per);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      const SimulatedSample sample = simulate_replicate(design, r);
      for (std::size_t e = 0; e < per; ++e)
        out.records[r * per + e] =
            run_estimator(config.estimators[e], sample, static_cast<int>(r), config.lambda_true);
    }
  };
  const unsigned nthreads = std::min<unsigned>(worker_count(threads), static_cast<unsigned>(reps));
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
};

struct EstimatorSummary {
  Estimator estimator = Estimator::Proposed;
  std::size_t attempted = 0;
  std::size_t converged = 0;
  std::vector<ParamSummary> params;

  double convergence_rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(converged) / static_cast<double>(attempted);
  }
  const ParamSummary& param(std::string_view name) const {
    for (const auto& p : params)
      if (p.name == name) return p;
    fail(ErrorCode::Invalid, "no parameter '" + std::string(name) + "' in summary");
  }
};

struct McSummary {
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& operator[](Estimator e) const {
    for (const auto& s : estimators)
      if (s.estimator == e) return s;
    fail(ErrorCode::Invalid, "estimator '" + std::string(to_string(e)) + "' not in summary");
  }
};

// Linear interpolation between order statistics (R type 7).
inline double quantile(std::vector<double> v, double prob) {
  require(!v.empty(), ErrorCode::Invalid, "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline ParamSummary summarize_values(std::string name, const std::vector<double>& v) {
  ParamSummary s;
  s.name = std::move(name);
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  s.p5 = quantile(v, 0.05);
  s.p95 = quantile(v, 0.95);
  return s;
}

// Column of converged estimates for one parameter, in record order.
inline std::vector<double> collect(const std::vector<EstimateRecord>& records, Estimator e,
                                   std::size_t param_index) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.estimator == e && r.converged && param_index < r.params.size())
      v.push_back(r.params[param_index]);
  return v;
}

inline std::vector<double> collect(const std::vector<EstimateRecord>& records, Estimator e,
                                   std::string_view name) {
  const auto names = parameter_names(e);
  const auto it = std::find(names.begin(), names.end(), name);
  require(it != names.end(), ErrorCode::Invalid, "no parameter '" + std::string(name) + "'");
  return collect(records, e, static_cast<std::size_t>(it - names.begin()));
}

// Non-converged replicates are counted but excluded from the moments.
inline McSummary summarize(const std::vector<EstimateRecord>& records) {
  McSummary out;
  for (Estimator e : kAllEstimators) {
    EstimatorSummary s;
    s.estimator = e;
    for (const auto& r : records) {
      if (r.estimator != e) continue;
      ++s.attempted;
      if (r.converged) ++s.converged;
    }
    if (s.attempted == 0) continue;
    const auto names = parameter_names(e);
    for (std::size_t j = 0; j < names.size(); ++j)
      s.params.push_back(summarize_values(names[j], collect(records, e, j)));
    out.estimators.push_back(std::move(s));
  }
  return out;
}

inline McSummary summarize(const McResult& result) { return summarize(result.records); }

// Full factorial sweep over grid sizes, lambda values and alpha vectors.
struct SweepConfig {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> grids{{7, 7}, {9, 9}, {12, 12}, {20, 20}};
  std::vector<double> lambdas{-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75};
  std::vector<VectorXd> alphas;
  VectorXd beta_true = (VectorXd(3) << 1.0, -1.0, 0.5).finished();
  int replications = 500;
  std::uint64_t seed = 1;
  std::vector<Estimator> estimators{Estimator::Proposed};
};

// alpha0 in {0,1}, alpha1 in {-1,0}, alpha2 in {0,1}; optionally only the
// heteroskedastic combinations (alpha1, alpha2 not both zero).
inline std::vector<VectorXd> design_alpha_grid(bool heteroskedastic_only) {
  std::vector<VectorXd> out;
  for (double a0 : {0.0, 1.0})
    for (double a1 : {-1.0, 0.0})
      for (double a2 : {0.0, 1.0}) {
        if (heteroskedastic_only && a1 == 0.0 && a2 == 0.0) continue;
        out.push_back((VectorXd(3) << a0, a1, a2).finished());
      }
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::vector<SimConfig> expand(const SweepConfig& sweep) {
  require(!sweep.grids.empty() && !sweep.lambdas.empty() && !sweep.alphas.empty(),
          ErrorCode::Invalid, "sweep: grids, lambdas and alphas must be non-empty");
  std::vector<SimConfig> cells;
  std::uint64_t index = 0;
  for (const auto& [rows, cols] : sweep.grids)
    for (const VectorXd& alpha : sweep.alphas)
      for (double lambda : sweep.lambdas) {
        SimConfig c;
        c.grid_rows = rows;
        c.grid_cols = cols;
        c.beta_true = sweep.beta_true;
        c.alpha_true = alpha;
        c.lambda_true = lambda;
        c.replications = sweep.replications;
        c.seed = splitmix64(sweep.seed ^ splitmix64(index++));
        c.estimators = sweep.estimators;
        validate(c);
        cells.push_back(std::move(c));
      }
  return cells;
}

}  // namespace hetsem
