// hetsem: fit, simulate and moran subcommands.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hetsem/csv.hpp"
#include "hetsem/diagnostics.hpp"
#include "hetsem/report.hpp"
#include "hetsem/sim_io.hpp"
#include "hetsem/weights.hpp"

namespace {

using namespace hetsem;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      require(used == tok.size(), ErrorCode::Parse, "");
    } catch (const std::exception&) {
      fail(ErrorCode::Parse, flag + ": '" + tok + "' is not a number");
    }
  }
  return out;
}

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool parse_bool(const std::string& s, const std::string& flag) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorCode::Invalid, flag + ": expected true or false, got '" + s + "'");
}

struct WeightsArgs {
  std::string path;
  std::string format = "edges";
  std::string standardize = "true";

  void add(CLI::App* cmd) {
    cmd->add_option("--weights", path, "spatial weights file")->required();
    cmd->add_option("--weights-format", format, "edges | dense");
    cmd->add_option("--row-standardize", standardize, "true | false");
  }

  WeightMatrix load(Eigen::Index n) const {
    require(format == "edges" || format == "dense", ErrorCode::Invalid,
            "--weights-format: expected edges or dense, got '" + format + "'");
    WeightMatrix w = load_weights(path, format == "edges" ? WeightsFormat::EdgeList : WeightsFormat::Dense);
    if (parse_bool(standardize, "--row-standardize")) w = row_standardize(w);
    require(w.size() == n, ErrorCode::Dimension,
            "weights have " + std::to_string(w.size()) + " units but the data has " +
                std::to_string(n) + " rows");
    return w;
  }
};

struct FitArgs {
  std::string data, y, x, z, out, estimator = "proposed", scale = "var";
  WeightsArgs weights;
};

int cmd_fit(const FitArgs& a) {
  const DataTable table = DataTable::load(a.data);
  const auto x_cols = split_list(a.x);
  const auto z_cols = split_list(a.z);
  require(!x_cols.empty(), ErrorCode::Invalid, "--x: at least one column required");
  const VectorXd y = table.numeric(a.y);
  const MatrixXd x = with_intercept(table.numeric(x_cols));
  const MatrixXd z = with_intercept(table.numeric(z_cols));
  const WeightMatrix w = a.weights.load(y.size());

  FitRequest req;
  req.estimator = parse_estimator(a.estimator);
  req.scale = parse_variance_scale(a.scale);
  req.y_column = a.y;
  req.x_columns = x_cols;
  req.z_columns = z_cols;
  const FitReport report = make_fit_report(ModelData(y, x, z, w), req);
  print_report(std::cout, report);
  if (!a.out.empty()) {
    std::ofstream os(a.out);
    require(static_cast<bool>(os), ErrorCode::Parse, "cannot write '" + a.out + "'");
    os << serialize(report) << "\n";
  }
  return 0;
}

struct SimulateArgs {
  std::string config, grid = "12x12", lambda = "0.5", alpha = "0,-1,1", beta = "1,-1,0.5";
  std::string estimators = "proposed", out_dir = ".";
  int reps = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  bool cells = false;
};

void write_file(const std::filesystem::path& p, void (*writer)(std::ostream&, const SweepResult&),
                const SweepResult& r) {
  std::ofstream os(p);
  require(static_cast<bool>(os), ErrorCode::Parse, "cannot write '" + p.string() + "'");
  writer(os, r);
}

int cmd_simulate(const SimulateArgs& a, const CLI::App& cmd) {
  SweepConfig s;
  if (!a.config.empty()) {
    for (const char* f : {"--grid", "--lambda", "--alpha", "--beta", "--reps", "--seed", "--estimators"})
      require(cmd.count(f) == 0, ErrorCode::Invalid,
              std::string(f) + " cannot be combined with --config");
    s = load_sweep_config(a.config);
  } else {
    s.grids.clear();
    for (const auto& g : split_list(a.grid)) s.grids.push_back(parse_grid(g));
    s.lambdas = parse_numbers(a.lambda, "--lambda");
    const auto alpha = parse_numbers(a.alpha, "--alpha");
    const auto beta = parse_numbers(a.beta, "--beta");
    require(alpha.size() == 3, ErrorCode::Invalid, "--alpha: expected 3 values a0,a1,a2");
    require(beta.size() == 3, ErrorCode::Invalid, "--beta: expected 3 values b0,b1,b2");
    s.alphas = {to_vector(alpha)};
    s.beta_true = to_vector(beta);
    require(a.reps >= 1, ErrorCode::Invalid, "--reps: must be at least 1");
    s.replications = a.reps;
    s.seed = a.seed;
    s.estimators.clear();
    for (const auto& e : split_list(a.estimators)) s.estimators.push_back(parse_estimator(e));
    require(!s.estimators.empty(), ErrorCode::Invalid, "--estimators: select at least one");
  }
  expand(s);  // validate every cell before running any

  const SweepResult r = run_sweep(s, a.threads);
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.csv", write_summary_csv, r);
  write_file(dir / "estimates.csv", write_estimates_csv, r);
  write_file(dir / "lambda_trace.csv", write_lambda_trace_csv, r);
  if (a.cells) {
    for (std::size_t c = 0; c < r.cells.size(); ++c) {
      SweepResult one;
      one.cells = {r.cells[c]};
      write_file(dir / ("cell_" + std::to_string(c) + "_summary.csv"), write_summary_csv, one);
    }
  }
  print_table(std::cout, r);
  std::cout << "wrote " << (dir / "summary.csv").string() << ", " << (dir / "estimates.csv").string()
            << "\n";
  return 0;
}

struct MoranArgs {
  std::string data, variable, residuals_of, scatter, moments = "randomization";
  int permutations = 0;
  std::uint64_t seed = 1;
  WeightsArgs weights;
};

int cmd_moran(const MoranArgs& a) {
  require(a.variable.empty() != a.residuals_of.empty(), ErrorCode::Invalid,
          "give exactly one of --variable or --residuals-of");
  VectorXd x;
  if (!a.variable.empty()) {
    require(!a.data.empty(), ErrorCode::Invalid, "--variable needs --data");
    x = DataTable::load(a.data).numeric(a.variable);
  } else {
    std::ifstream in(a.residuals_of);
    require(static_cast<bool>(in), ErrorCode::Parse, "cannot open '" + a.residuals_of + "'");
    std::stringstream text;
    text << in.rdbuf();
    const FitReport r = parse_report(text.str());
    x = to_vector(r.residuals);
  }
  require(a.moments == "normality" || a.moments == "randomization", ErrorCode::Invalid,
          "--moments: expected normality or randomization");
  const WeightMatrix w = a.weights.load(x.size());
  const MoranResult m = morans_i(x, w, a.moments == "normality" ? MoranMoments::Normality
                                                                : MoranMoments::Randomization);
  std::cout << std::setprecision(6) << "Moran's I: " << m.I << "\nE[I]: " << m.expectation
            << "\nVar[I]: " << m.variance << "\nz: " << m.z << "\np (two-sided, " << a.moments
            << "): " << m.p_value << "\n";
  if (a.permutations > 0) {
    const MoranPermutation p = moran_permutation_test(x, w, a.permutations, a.seed);
    std::cout << "p (permutation, " << p.permutations << "): " << p.p_value << "\n";
  }
  if (!a.scatter.empty()) {
    const MoranScatter s = moran_scatter(x, w);
    std::ofstream os(a.scatter);
    require(static_cast<bool>(os), ErrorCode::Parse, "cannot write '" + a.scatter + "'");
    os << "unit,value,lag\n" << std::setprecision(12);
    for (Eigen::Index i = 0; i < s.value.size(); ++i)
      os << i << ',' << s.value[i] << ',' << s.lag[i] << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial error model with heteroskedastic perturbations"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to CSV data");
  fit_cmd->add_option("--data", fa.data, "CSV file with header")->required();
  fit_cmd->add_option("--y", fa.y, "response column")->required();
  fit_cmd->add_option("--x", fa.x, "mean covariates, comma separated")->required();
  fit_cmd->add_option("--z", fa.z, "variance covariates, comma separated (default: intercept only)");
  fit_cmd->add_option("--estimator", fa.estimator, "proposed | ho-sem | sar | ols");
  fit_cmd->add_option("--variance-scale", fa.scale, "var | sd");
  fit_cmd->add_option("--out", fa.out, "JSON report path");
  fa.weights.add(fit_cmd);

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo sweep");
  sim_cmd->add_option("--config", sa.config, "sweep configuration JSON");
  sim_cmd->add_option("--grid", sa.grid, "RxC, comma separated for several");
  sim_cmd->add_option("--lambda", sa.lambda, "true lambda values, comma separated");
  sim_cmd->add_option("--alpha", sa.alpha, "a0,a1,a2");
  sim_cmd->add_option("--beta", sa.beta, "b0,b1,b2");
  sim_cmd->add_option("--reps", sa.reps, "replications per cell");
  sim_cmd->add_option("--seed", sa.seed, "master seed");
  sim_cmd->add_option("--estimators", sa.estimators, "comma separated: proposed,ho-sem,sar,ols");
  sim_cmd->add_option("--out-dir", sa.out_dir, "output directory");
  sim_cmd->add_option("--threads", sa.threads, "worker threads (0 = hardware)");
  sim_cmd->add_flag("--per-cell", sa.cells, "also write one summary per cell");

  MoranArgs ma;
  auto* moran_cmd = app.add_subcommand("moran", "Moran's I test and scatter");
  moran_cmd->add_option("--data", ma.data, "CSV file with header");
  moran_cmd->add_option("--variable", ma.variable, "column to test");
  moran_cmd->add_option("--residuals-of", ma.residuals_of, "fit report JSON; tests its residuals");
  moran_cmd->add_option("--scatter", ma.scatter, "write scatter pairs CSV");
  moran_cmd->add_option("--moments", ma.moments, "normality | randomization");
  moran_cmd->add_option("--permutations", ma.permutations, "permutation test draws (0 = off)");
  moran_cmd->add_option("--seed", ma.seed, "permutation seed");
  ma.weights.add(moran_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERR_ARG: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(fa);
    if (*sim_cmd) return cmd_simulate(sa, *sim_cmd);
    if (*moran_cmd) return cmd_moran(ma);
  } catch (const Error& e) {
    std::cerr << error_prefix(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERR_NUM: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
