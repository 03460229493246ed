#pragma once

// Moran's I for global spatial autocorrelation, with normality and
// randomization moments, a seeded permutation test, and scatter data.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "hetsem/error.hpp"
#include "hetsem/inference.hpp"
#include "hetsem/weights.hpp"

namespace hetsem {

enum class MoranMoments { Normality, Randomization };

struct MoranResult {
  double I = 0.0;
  double expectation = 0.0;
  double variance = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct WeightSums {
  double s0 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

inline WeightSums weight_sums(const WeightMatrix& w) {
  const SparseRowMatrix& m = w.matrix();
  const SparseRowMatrix sym = m + SparseRowMatrix(m.transpose());
  WeightSums s;
  s.s0 = m.sum();
  s.s1 = 0.5 * sym.squaredNorm();
  const VectorXd rows = w.row_sums();
  const VectorXd cols = VectorXd::Ones(w.size()).transpose() * m;
  s.s2 = (rows + cols).squaredNorm();
  return s;
}

namespace detail {

inline VectorXd centered_checked(const VectorXd& x, const WeightMatrix& w) {
  require(x.size() == w.size(), ErrorCode::Dimension,
          "variable has " + std::to_string(x.size()) + " values but W has " +
              std::to_string(w.size()) + " units");
  require(x.size() >= 3, ErrorCode::Dimension, "Moran's I needs at least 3 observations");
  VectorXd c = x.array() - x.mean();
  require(c.squaredNorm() > 0.0 && std::isfinite(c.squaredNorm()), ErrorCode::Invalid,
          "zero variance: variable is constant");
  return c;
}

inline double moran_statistic(const VectorXd& centered, const WeightMatrix& w, double s0) {
  const double n = static_cast<double>(centered.size());
  return (n / s0) * centered.dot(w.matrix() * centered) / centered.squaredNorm();
}

}  // namespace detail

inline MoranResult morans_i(const VectorXd& x, const WeightMatrix& w,
                            MoranMoments moments = MoranMoments::Normality) {
  const VectorXd c = detail::centered_checked(x, w);
  const WeightSums s = weight_sums(w);
  require(s.s0 > 0.0, ErrorCode::Invalid, "weight matrix has no links");
  const double n = static_cast<double>(x.size());

  MoranResult r;
  r.I = detail::moran_statistic(c, w, s.s0);
  r.expectation = -1.0 / (n - 1.0);
  const double s0sq = s.s0 * s.s0;
  double second = 0.0;  // E[I^2]
  if (moments == MoranMoments::Normality) {
    second = (n * n * s.s1 - n * s.s2 + 3.0 * s0sq) / ((n * n - 1.0) * s0sq);
  } else {
    const double m2 = c.squaredNorm() / n;
    const double m4 = c.array().pow(4).sum() / n;
    const double b2 = m4 / (m2 * m2);
    const double a = n * ((n * n - 3.0 * n + 3.0) * s.s1 - n * s.s2 + 3.0 * s0sq);
    const double b = b2 * ((n * n - n) * s.s1 - 2.0 * n * s.s2 + 6.0 * s0sq);
    second = (a - b) / ((n - 1.0) * (n - 2.0) * (n - 3.0) * s0sq);
  }
  r.variance = second - r.expectation * r.expectation;
  require(r.variance > 0.0, ErrorCode::Numeric, "Moran's I variance is not positive");
  r.z = (r.I - r.expectation) / std::sqrt(r.variance);
  r.p_value = two_sided_normal_p(r.z);
  return r;
}

struct MoranPermutation {
  double I = 0.0;
  double p_value = 1.0;  // two-sided pseudo p-value, (1 + #extreme) / (1 + permutations)
  int permutations = 0;
};

// Permutation reference distribution; permutation r draws from its own
// engine seeded with (seed, r), so the result does not depend on scheduling.
inline MoranPermutation moran_permutation_test(const VectorXd& x, const WeightMatrix& w,
                                               int permutations = 999, std::uint64_t seed = 1) {
  require(permutations >= 1, ErrorCode::Invalid, "permutations must be positive");
  const VectorXd c = detail::centered_checked(x, w);
  const WeightSums s = weight_sums(w);
  MoranPermutation out;
  out.I = detail::moran_statistic(c, w, s.s0);
  out.permutations = permutations;
  const double expectation = -1.0 / (static_cast<double>(x.size()) - 1.0);
  const double observed = std::abs(out.I - expectation);
  int extreme = 0;
  VectorXd shuffled = c;
  for (int r = 0; r < permutations; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    shuffled = c;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double ir = detail::moran_statistic(shuffled, w, s.s0);
    if (std::abs(ir - expectation) >= observed) ++extreme;
  }
  out.p_value = (1.0 + extreme) / (1.0 + permutations);
  return out;
}

struct MoranScatter {
  VectorXd value;  // standardized variable
  VectorXd lag;    // its spatial lag
};

// Standardized variable against its spatial lag. For row-standardized W the
// least-squares slope of lag on value equals Moran's I.
inline MoranScatter moran_scatter(const VectorXd& x, const WeightMatrix& w) {
  const VectorXd c = detail::centered_checked(x, w);
  const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(c.size()));
  MoranScatter out;
  out.value = c / sd;
  out.lag = w.matrix() * out.value;
  return out;
}

inline double scatter_slope(const MoranScatter& s) {
  const double mx = s.value.mean();
  const double my = s.lag.mean();
  const VectorXd dx = s.value.array() - mx;
  return dx.dot(s.lag.array().matrix() - VectorXd::Constant(s.lag.size(), my)) / dx.squaredNorm();
}

}  // namespace hetsem
