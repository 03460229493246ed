#pragma once

// Spatial weight matrices: construction, validation, standardization and the
// cached real spectrum used by the eigenvalue log-determinant.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hetsem/error.hpp"

namespace hetsem {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr std::size_t kDefaultDenseEigenThreshold = 2048;
inline constexpr double kRowSumTolerance = 1e-12;

enum class WeightsFormat { EdgeList, Dense };

class WeightMatrix {
 public:
  // Validates the invariants: n >= 2, zero diagonal, nonnegative entries.
  WeightMatrix(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& entries)
      : matrix_(n, n) {
    require(n >= 2, ErrorCode::Invalid, "weight matrix needs at least 2 units");
    for (const auto& t : entries) {
      require(t.row() >= 0 && t.row() < n && t.col() >= 0 && t.col() < n,
              ErrorCode::Dimension,
              "weight index out of range (" + std::to_string(t.row()) + "," +
                  std::to_string(t.col()) + ") for n=" + std::to_string(n));
      if (t.value() == 0.0) continue;
      require(t.row() != t.col(), ErrorCode::Invalid,
              "self-loop at unit " + std::to_string(t.row()));
      require(t.value() > 0.0 && std::isfinite(t.value()), ErrorCode::Invalid,
              "negative or non-finite weight at (" + std::to_string(t.row()) +
                  "," + std::to_string(t.col()) + ")");
    }
    matrix_.setFromTriplets(entries.begin(), entries.end());
    matrix_.prune(0.0);
    matrix_.makeCompressed();
    row_standardized_ = rows_sum_to_one();
    cache_ = std::make_shared<SpectrumCache>();
  }

  Eigen::Index size() const noexcept { return matrix_.rows(); }
  const SparseRowMatrix& matrix() const noexcept { return matrix_; }
  bool row_standardized() const noexcept { return row_standardized_; }
  Eigen::Index nonzeros() const noexcept { return matrix_.nonZeros(); }

  double operator()(Eigen::Index i, Eigen::Index j) const { return matrix_.coeff(i, j); }

  Eigen::VectorXd row_sums() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(size());
    for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i)
      for (SparseRowMatrix::InnerIterator it(matrix_, i); it; ++it) s[i] += it.value();
    return s;
  }

  bool is_symmetric(double tol = 0.0) const {
    if (matrix_.nonZeros() == 0) return true;
    SparseRowMatrix diff = matrix_ - SparseRowMatrix(matrix_.transpose());
    diff.prune(0.0);
    return diff.nonZeros() == 0 || diff.coeffs().cwiseAbs().maxCoeff() <= tol;
  }

  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

  // W x
  Eigen::VectorXd lag(const Eigen::VectorXd& x) const {
    require(x.size() == size(), ErrorCode::Dimension, "spatial lag: size mismatch");
    return matrix_ * x;
  }
  Eigen::MatrixXd lag(const Eigen::MatrixXd& x) const {
    require(x.rows() == size(), ErrorCode::Dimension, "spatial lag: size mismatch");
    return matrix_ * x;
  }

  // Real spectrum, ascending. Computed once and shared between copies.
  const Eigen::VectorXd& eigenvalues(
      std::size_t dense_threshold = kDefaultDenseEigenThreshold) const {
    require(static_cast<std::size_t>(size()) <= dense_threshold, ErrorCode::Dimension,
            "n=" + std::to_string(size()) + " exceeds dense eigen threshold " +
                std::to_string(dense_threshold) + "; use the LU log-determinant");
    std::call_once(cache_->once, [this] { cache_->values = compute_spectrum(); });
    return cache_->values;
  }

  bool has_cached_spectrum() const noexcept { return cache_->values.size() > 0; }

 private:
  friend WeightMatrix row_standardize(const WeightMatrix& w);

  struct SpectrumCache {
    std::once_flag once;
    Eigen::VectorXd values;
  };

  bool rows_sum_to_one() const {
    const Eigen::VectorXd s = row_sums();
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] != 0.0 && std::abs(s[i] - 1.0) > kRowSumTolerance) return false;
    return true;
  }

  Eigen::VectorXd compute_spectrum() const {
    const Eigen::MatrixXd dense_w = dense();
    Eigen::MatrixXd sym;
    if (is_symmetric(1e-14)) {
      sym = dense_w;
    } else if (symmetrizer_) {
      // W = D^{-1} A with A symmetric, so D^{1/2} W D^{-1/2} is symmetric and similar to W.
      const Eigen::VectorXd root = symmetrizer_->cwiseSqrt();
      sym = root.asDiagonal() * dense_w * root.cwiseInverse().asDiagonal();
      sym = 0.5 * (sym + sym.transpose()).eval();
    }
    if (sym.size() > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
      require(solver.info() == Eigen::Success, ErrorCode::Numeric,
              "symmetric eigensolver failed");
      return solver.eigenvalues();
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(dense_w, false);
    require(solver.info() == Eigen::Success, ErrorCode::Numeric, "eigensolver failed");
    const Eigen::VectorXcd ev = solver.eigenvalues();
    Eigen::VectorXd out(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      require(std::abs(ev[i].imag()) < 1e-8, ErrorCode::Numeric,
              "weight matrix has a complex spectrum; use the LU log-determinant");
      out[i] = ev[i].real();
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  SparseRowMatrix matrix_;
  bool row_standardized_ = false;
  // Row sums of the symmetric matrix this one was standardized from.
  std::optional<Eigen::VectorXd> symmetrizer_;
  std::shared_ptr<SpectrumCache> cache_;
};

// Binary rook contiguity on a rows x cols lattice, cells numbered row-major.
inline WeightMatrix build_rook_grid(Eigen::Index rows, Eigen::Index cols) {
  require(rows >= 1 && cols >= 1 && rows * cols >= 2, ErrorCode::Invalid,
          "degenerate grid " + std::to_string(rows) + "x" + std::to_string(cols));
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(4 * rows * cols));
  auto id = [cols](Eigen::Index r, Eigen::Index c) { return r * cols + c; };
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (r > 0) entries.emplace_back(id(r, c), id(r - 1, c), 1.0);
      if (r + 1 < rows) entries.emplace_back(id(r, c), id(r + 1, c), 1.0);
      if (c > 0) entries.emplace_back(id(r, c), id(r, c - 1), 1.0);
      if (c + 1 < cols) entries.emplace_back(id(r, c), id(r, c + 1), 1.0);
    }
  }
  return WeightMatrix(rows * cols, entries);
}

// Divides each row by its sum. Islands (zero rows) are rejected.
inline WeightMatrix row_standardize(const WeightMatrix& w) {
  const Eigen::VectorXd sums = w.row_sums();
  for (Eigen::Index i = 0; i < sums.size(); ++i)
    require(sums[i] > 0.0, ErrorCode::Invalid,
            "island: unit " + std::to_string(i) + " has no neighbors");
  if (w.row_standardized()) return w;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(w.nonzeros()));
  for (Eigen::Index i = 0; i < w.matrix().outerSize(); ++i)
    for (SparseRowMatrix::InnerIterator it(w.matrix(), i); it; ++it)
      entries.emplace_back(i, it.col(), it.value() / sums[i]);
  WeightMatrix out(w.size(), entries);
  out.row_standardized_ = true;
  if (w.is_symmetric(1e-14)) out.symmetrizer_ = sums;
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& raw, std::size_t line_no) {
  const std::string s = trim(raw);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(!s.empty() && used == s.size(), ErrorCode::Parse,
          "line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return v;
}

inline long long parse_index(const std::string& raw, std::size_t line_no) {
  const double v = parse_double(raw, line_no);
  require(v >= 0 && v == std::floor(v), ErrorCode::Parse,
          "line " + std::to_string(line_no) + ": invalid unit index '" + trim(raw) + "'");
  return static_cast<long long>(v);
}

}  // namespace detail

// Edge list: "i,j,w" per line with 0-based indices (an optional header line
// starting with a non-digit is skipped). Dense: n rows of n values.
inline WeightMatrix parse_weights(std::istream& in, WeightsFormat format) {
  std::vector<Eigen::Triplet<double>> entries;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index n = 0;
  if (format == WeightsFormat::EdgeList) {
    long long max_index = -1;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (line_no == 1 && !(std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '.'))
        continue;
      const auto f = detail::split_csv_line(t);
      require(f.size() == 3, ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": expected i,j,w");
      const long long i = detail::parse_index(f[0], line_no);
      const long long j = detail::parse_index(f[1], line_no);
      const double v = detail::parse_double(f[2], line_no);
      require(i != j || v == 0.0, ErrorCode::Invalid, "self-loop at unit " + std::to_string(i));
      require(v >= 0.0, ErrorCode::Invalid,
              "line " + std::to_string(line_no) + ": negative weight");
      max_index = std::max({max_index, i, j});
      entries.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), v);
    }
    n = static_cast<Eigen::Index>(max_index + 1);
  } else {
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto f = detail::split_csv_line(t);
      std::vector<double> row;
      row.reserve(f.size());
      for (const auto& cell : f) row.push_back(detail::parse_double(cell, line_no));
      require(rows.empty() || row.size() == rows.front().size(), ErrorCode::Parse,
              "line " + std::to_string(line_no) + ": ragged row");
      rows.push_back(std::move(row));
    }
    n = static_cast<Eigen::Index>(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      require(static_cast<Eigen::Index>(row.size()) == n, ErrorCode::Parse,
              "dense weights must be square: row " + std::to_string(i) + " has " +
                  std::to_string(row.size()) + " entries, expected " + std::to_string(n));
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = row[static_cast<std::size_t>(j)];
        if (v == 0.0) continue;
        require(i != j, ErrorCode::Invalid, "self-loop at unit " + std::to_string(i));
        require(v > 0.0, ErrorCode::Invalid,
                "negative weight at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        entries.emplace_back(i, j, v);
      }
    }
  }
  return WeightMatrix(n, entries);
}

inline WeightMatrix load_weights(const std::string& path, WeightsFormat format) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Parse, "cannot open weights file '" + path + "'");
  return parse_weights(in, format);
}

}  // namespace hetsem
