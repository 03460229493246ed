#pragma once

// JSON sweep configuration and CSV outputs of the simulation harness.
//
// Config fields (all optional except where a default cannot apply):
//   "grids":        [[rows, cols], ...]   or "grid": "RxC"
//   "lambdas":      [l, ...]              or "lambda": l
//   "alphas":       [[a0, a1, a2], ...]   or "alpha": [a0, a1, a2]
//                   or "alpha_set": "full" | "heteroskedastic"
//   "beta":         [b0, b1, b2]
//   "replications": int >= 1
//   "seed":         unsigned int
//   "estimators":   ["proposed", "ho-sem", "sar", "ols"]

#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetsem/error.hpp"
#include "hetsem/montecarlo.hpp"

namespace hetsem {

inline std::pair<Eigen::Index, Eigen::Index> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  require(x != std::string::npos, ErrorCode::Parse, "grid must look like RxC, got '" + s + "'");
  try {
    std::size_t used_r = 0;
    std::size_t used_c = 0;
    const long r = std::stol(s.substr(0, x), &used_r);
    const long c = std::stol(s.substr(x + 1), &used_c);
    require(used_r == x && used_c == s.size() - x - 1, ErrorCode::Parse, "bad grid");
    require(r >= 1 && c >= 1, ErrorCode::Invalid, "grid dimensions must be positive");
    return {r, c};
  } catch (const std::logic_error&) {
    fail(ErrorCode::Parse, "grid must look like RxC, got '" + s + "'");
  }
}

namespace detail {

inline VectorXd json_vector3(const nlohmann::json& j, const std::string& field) {
  require(j.is_array() && j.size() == 3, ErrorCode::Invalid,
          "config." + field + ": expected an array of 3 numbers");
  VectorXd v(3);
  for (int i = 0; i < 3; ++i) {
    require(j[static_cast<std::size_t>(i)].is_number(), ErrorCode::Invalid,
            "config." + field + "[" + std::to_string(i) + "]: expected a number");
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

}  // namespace detail

inline SweepConfig parse_sweep_config(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::Invalid, "config: expected a JSON object");
  static const std::vector<std::string> known{"grids",      "grid",       "lambdas", "lambda",
                                              "alphas",     "alpha",      "alpha_set", "beta",
                                              "replications", "seed",     "estimators"};
  for (const auto& [key, value] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(), ErrorCode::Invalid,
            "config." + key + ": unknown field");

  SweepConfig s;
  if (j.contains("grids")) {
    s.grids.clear();
    const auto& g = j["grids"];
    require(g.is_array() && !g.empty(), ErrorCode::Invalid, "config.grids: expected [[rows, cols], ...]");
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::string where = "config.grids[" + std::to_string(i) + "]";
      if (g[i].is_string()) {
        s.grids.push_back(parse_grid(g[i].get<std::string>()));
        continue;
      }
      require(g[i].is_array() && g[i].size() == 2 && g[i][0].is_number_integer() &&
                  g[i][1].is_number_integer(),
              ErrorCode::Invalid, where + ": expected [rows, cols]");
      s.grids.emplace_back(g[i][0].get<long>(), g[i][1].get<long>());
    }
  } else if (j.contains("grid")) {
    require(j["grid"].is_string(), ErrorCode::Invalid, "config.grid: expected \"RxC\"");
    s.grids = {parse_grid(j["grid"].get<std::string>())};
  }
  for (const auto& [r, c] : s.grids)
    require(r >= 1 && c >= 1 && r * c >= 4, ErrorCode::Invalid,
            "config.grids: " + std::to_string(r) + "x" + std::to_string(c) + " has fewer than 4 cells");

  if (j.contains("lambdas")) {
    const auto& l = j["lambdas"];
    require(l.is_array() && !l.empty(), ErrorCode::Invalid, "config.lambdas: expected a non-empty array");
    s.lambdas.clear();
    for (const auto& v : l) {
      require(v.is_number(), ErrorCode::Invalid, "config.lambdas: expected numbers");
      s.lambdas.push_back(v.get<double>());
    }
  } else if (j.contains("lambda")) {
    require(j["lambda"].is_number(), ErrorCode::Invalid, "config.lambda: expected a number");
    s.lambdas = {j["lambda"].get<double>()};
  }
  for (double l : s.lambdas)
    require(std::abs(l) < 1.0, ErrorCode::Invalid,
            "config.lambdas: " + std::to_string(l) + " is outside (-1, 1)");

  if (j.contains("alphas")) {
    const auto& a = j["alphas"];
    require(a.is_array() && !a.empty(), ErrorCode::Invalid, "config.alphas: expected [[a0,a1,a2], ...]");
    for (std::size_t i = 0; i < a.size(); ++i)
      s.alphas.push_back(detail::json_vector3(a[i], "alphas[" + std::to_string(i) + "]"));
  } else if (j.contains("alpha")) {
    s.alphas = {detail::json_vector3(j["alpha"], "alpha")};
  } else {
    std::string set = "heteroskedastic";
    if (j.contains("alpha_set")) {
      require(j["alpha_set"].is_string(), ErrorCode::Invalid, "config.alpha_set: expected a string");
      set = j["alpha_set"].get<std::string>();
    }
    require(set == "full" || set == "heteroskedastic", ErrorCode::Invalid,
            "config.alpha_set: expected \"full\" or \"heteroskedastic\"");
    s.alphas = design_alpha_grid(set == "heteroskedastic");
  }

  if (j.contains("beta")) s.beta_true = detail::json_vector3(j["beta"], "beta");
  if (j.contains("replications")) {
    require(j["replications"].is_number_integer() && j["replications"].get<long>() >= 1,
            ErrorCode::Invalid, "config.replications: must be an integer >= 1");
    s.replications = j["replications"].get<int>();
  }
  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned(), ErrorCode::Invalid,
            "config.seed: must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("estimators")) {
    const auto& e = j["estimators"];
    require(e.is_array() && !e.empty(), ErrorCode::Invalid,
            "config.estimators: expected a non-empty array of names");
    s.estimators.clear();
    for (const auto& v : e) {
      require(v.is_string(), ErrorCode::Invalid, "config.estimators: expected strings");
      s.estimators.push_back(parse_estimator(v.get<std::string>()));
    }
  }
  return s;
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Parse, "cannot open config '" + path + "'");
  try {
    return parse_sweep_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    fail(ErrorCode::Parse, std::string("config: ") + ex.what());
  }
}

struct SweepResult {
  std::vector<McResult> cells;
};

inline SweepResult run_sweep(const SweepConfig& sweep, int threads = 0) {
  SweepResult out;
  for (const SimConfig& c : expand(sweep)) out.cells.push_back(run_monte_carlo(c, threads));
  return out;
}

// Records pooled over every cell with grid size n.
inline std::map<Eigen::Index, std::vector<EstimateRecord>> pool_by_n(const SweepResult& r) {
  std::map<Eigen::Index, std::vector<EstimateRecord>> pooled;
  for (const auto& cell : r.cells) {
    auto& dst = pooled[cell.config.n()];
    dst.insert(dst.end(), cell.records.begin(), cell.records.end());
  }
  return pooled;
}

inline void write_summary_csv(std::ostream& os, const SweepResult& r) {
  os << "estimator,n,parameter,mean,sd,p5,p95,count,convergence_rate\n";
  os << std::setprecision(10);
  for (const auto& [n, records] : pool_by_n(r)) {
    for (const auto& est : summarize(records).estimators)
      for (const auto& p : est.params)
        os << to_string(est.estimator) << ',' << n << ',' << p.name << ',' << p.mean << ','
           << p.sd << ',' << p.p5 << ',' << p.p95 << ',' << p.count << ','
           << est.convergence_rate() << '\n';
  }
}

inline void write_estimates_csv(std::ostream& os, const SweepResult& r) {
  os << "cell,n,lambda_true,alpha0,alpha1,alpha2,replicate,estimator,parameter,estimate,converged\n";
  os << std::setprecision(12);
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const SimConfig& cfg = r.cells[c].config;
    for (const auto& rec : r.cells[c].records) {
      const auto names = parameter_names(rec.estimator);
      for (std::size_t j = 0; j < rec.params.size() && j < names.size(); ++j)
        os << c << ',' << cfg.n() << ',' << cfg.lambda_true << ',' << cfg.alpha_true[0] << ','
           << cfg.alpha_true[1] << ',' << cfg.alpha_true[2] << ',' << rec.replicate << ','
           << to_string(rec.estimator) << ',' << names[j] << ',' << rec.params[j] << ','
           << (rec.converged ? 1 : 0) << '\n';
    }
  }
}

inline void write_lambda_trace_csv(std::ostream& os, const SweepResult& r) {
  os << "cell,n,lambda_true,replicate,step,lambda\n";
  os << std::setprecision(12);
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const SimConfig& cfg = r.cells[c].config;
    for (const auto& rec : r.cells[c].records)
      for (std::size_t s = 0; s < rec.lambda_trace.size(); ++s)
        os << c << ',' << cfg.n() << ',' << cfg.lambda_true << ',' << rec.replicate << ',' << s
           << ',' << rec.lambda_trace[s] << '\n';
  }
}

// Mean / SD / P5 / P95 of the beta estimates per estimator and grid size.
inline void print_table(std::ostream& os, const SweepResult& r) {
  os << std::left << std::setw(10) << "model" << std::setw(6) << "n";
  for (const char* stat : {"mean", "sd", "p5", "p95"})
    for (int j = 0; j < 3; ++j)
      os << std::right << std::setw(9) << (std::string(stat) + "(b" + std::to_string(j) + ")");
  os << "  conv\n" << std::fixed << std::setprecision(3);
  const auto pooled = pool_by_n(r);
  for (Estimator e : kAllEstimators) {
    for (const auto& [n, records] : pooled) {
      const McSummary s = summarize(records);
      const auto it = std::find_if(s.estimators.begin(), s.estimators.end(),
                                   [e](const EstimatorSummary& x) { return x.estimator == e; });
      if (it == s.estimators.end()) continue;
      os << std::left << std::setw(10) << to_string(e) << std::setw(6) << n << std::right;
      for (int stat = 0; stat < 4; ++stat)
        for (int j = 0; j < 3; ++j) {
          const ParamSummary& p = it->params[static_cast<std::size_t>(j)];
          const double v = stat == 0 ? p.mean : stat == 1 ? p.sd : stat == 2 ? p.p5 : p.p95;
          os << std::setw(9) << v;
        }
      os << std::setw(6) << it->convergence_rate() << '\n';
    }
  }
  os << std::defaultfloat;
}

}  // namespace hetsem
