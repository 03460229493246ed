#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

#include "hetsem/error.hpp"

namespace hetsem {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

inline bool full_column_rank(const MatrixXd& x) {
  if (x.rows() < x.cols()) return false;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  return qr.rank() == x.cols();
}

// Solves (X' diag(w) X) b = X' diag(w) y through a Cholesky factor of the
// normal-equation matrix.
inline VectorXd weighted_least_squares(const MatrixXd& x, const VectorXd& y,
                                       const VectorXd& w) {
  require(x.rows() == y.size() && y.size() == w.size(), ErrorCode::Dimension,
          "weighted least squares: size mismatch");
  const MatrixXd xw = x.transpose() * w.asDiagonal();
  const MatrixXd normal = xw * x;
  Eigen::LLT<MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) fail(ErrorCode::Numeric, "singular normal-equation matrix");
  const double min_pivot = llt.matrixLLT().diagonal().minCoeff();
  const double max_pivot = llt.matrixLLT().diagonal().maxCoeff();
  require(min_pivot > 1e-12 * max_pivot, ErrorCode::Numeric,
          "normal-equation matrix is numerically singular (rank-deficient design)");
  return llt.solve(xw * y);
}

inline VectorXd ordinary_least_squares(const MatrixXd& x, const VectorXd& y) {
  return weighted_least_squares(x, y, VectorXd::Ones(y.size()));
}

inline MatrixXd with_intercept(const MatrixXd& columns) {
  MatrixXd out(columns.rows(), columns.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(columns.cols()) = columns;
  return out;
}

}  // namespace hetsem
