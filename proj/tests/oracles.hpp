#pragma once

// Independent reference computations used only by the tests. They go through
// dense algebra or brute force, never through the library's fast paths.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hetsem/hetsem.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd dense_b(const hetsem::WeightMatrix& w, double lambda) {
  return MatrixXd::Identity(w.size(), w.size()) - lambda * w.dense();
}

// ln|det B| by dense LU of the full matrix.
inline double log_det_dense(const hetsem::WeightMatrix& w, double lambda) {
  const Eigen::PartialPivLU<MatrixXd> lu(dense_b(w, lambda));
  const MatrixXd& m = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(std::abs(m(i, i)));
  return s;
}

// ln|Omega| through an explicit Cholesky factor of the dense diagonal matrix.
inline double log_det_cholesky(const VectorXd& sigma2) {
  const MatrixXd omega = sigma2.asDiagonal();
  const Eigen::LLT<MatrixXd> llt(omega);
  const MatrixXd l = llt.matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

// Whiten with Omega^{-1/2} B, then plain least squares by Householder QR.
inline VectorXd gls_transform_ols(const hetsem::ModelData& d, double lambda, const VectorXd& sigma2) {
  const MatrixXd b = dense_b(d.w(), lambda);
  const VectorXd s = sigma2.cwiseSqrt().cwiseInverse();
  const MatrixXd xs = s.asDiagonal() * (b * d.x());
  const VectorXd ys = s.asDiagonal() * (b * d.y());
  return xs.householderQr().solve(ys);
}

// Log-likelihood written directly from the density of y = X beta + B^{-1} eps.
inline double loglik_direct(const hetsem::ModelData& d, const VectorXd& beta, const VectorXd& alpha,
                            double lambda) {
  const VectorXd sigma2 = (d.z() * alpha).array().exp().matrix();
  const MatrixXd b = dense_b(d.w(), lambda);
  const VectorXd e = b * (d.y() - d.x() * beta);
  const double n = static_cast<double>(d.n());
  return -0.5 * n * std::log(2.0 * M_PI) - 0.5 * sigma2.array().log().sum() +
         log_det_dense(d.w(), lambda) - 0.5 * (e.array().square() / sigma2.array()).sum();
}

inline VectorXd central_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                                 double h = 1e-5) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

struct GridMax {
  double argmax = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  double step = 0.0;
};

inline GridMax grid_scan(const std::function<double(double)>& f, double lo, double hi, int points) {
  GridMax g;
  g.step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double x = lo + i * g.step;
    const double v = f(x);
    if (v > g.value) {
      g.value = v;
      g.argmax = x;
    }
  }
  return g;
}

// Plain Nelder-Mead simplex maximizer.
inline VectorXd nelder_mead_max(const std::function<double(const VectorXd&)>& f, VectorXd x0,
                                double scale = 0.1, int max_eval = 20000, double tol = 1e-12) {
  const Eigen::Index n = x0.size();
  std::vector<VectorXd> s(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> v(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i + 1)][i] += scale;
  auto neg = [&f](const VectorXd& x) {
    const double r = f(x);
    return std::isfinite(r) ? -r : INFINITY;
  };
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = neg(s[i]);
  int evals = static_cast<int>(s.size());
  std::vector<std::size_t> idx(s.size());
  while (evals < max_eval) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
    if (std::abs(v[worst] - v[best]) <= tol * (1.0 + std::abs(v[best]))) break;
    VectorXd c = VectorXd::Zero(n);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != worst) c += s[i];
    c /= static_cast<double>(n);
    const VectorXd xr = c + (c - s[worst]);
    const double vr = neg(xr);
    ++evals;
    if (vr < v[best]) {
      const VectorXd xe = c + 2.0 * (c - s[worst]);
      const double ve = neg(xe);
      ++evals;
      if (ve < vr) s[worst] = xe, v[worst] = ve;
      else s[worst] = xr, v[worst] = vr;
    } else if (vr < v[second]) {
      s[worst] = xr, v[worst] = vr;
    } else {
      const VectorXd xc = c + 0.5 * (s[worst] - c);
      const double vc = neg(xc);
      ++evals;
      if (vc < v[worst]) {
        s[worst] = xc, v[worst] = vc;
      } else {
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (i == best) continue;
          s[i] = s[best] + 0.5 * (s[i] - s[best]);
          v[i] = neg(s[i]);
          ++evals;
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (v[i] < v[best]) best = i;
  return s[best];
}

}  // namespace oracle
