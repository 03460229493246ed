#pragma once

// Bounded one-dimensional maximization: a uniform grid pre-scan picks the
// basin, Brent's method polishes inside the bracket around the best node.

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <cstdint>
#include <limits>

#include "hetsem/error.hpp"

namespace hetsem {

struct Maximum1D {
  double argmax = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  double grid_argmax = 0.0;
  double grid_value = -std::numeric_limits<double>::infinity();
  bool polished = false;  // false: Brent failed, grid node returned
  std::uintmax_t evaluations = 0;
};

inline constexpr int kDefaultPrescanPoints = 17;
// Brent tolerance 2^(1-bits) = 7.5e-9 on the argument.
inline constexpr int kBrentBits = 28;

template <typename F>
Maximum1D maximize_bounded(F&& f, double lo, double hi, int grid_points = kDefaultPrescanPoints,
                           int bits = kBrentBits, std::uintmax_t max_iter = 200) {
  require(lo < hi && grid_points >= 3, ErrorCode::Invalid, "maximize_bounded: bad interval");
  Maximum1D out;
  const double step = (hi - lo) / (grid_points - 1);
  int best = -1;
  for (int g = 0; g < grid_points; ++g) {
    const double x = (g + 1 == grid_points) ? hi : lo + g * step;
    const double v = f(x);
    ++out.evaluations;
    if (std::isfinite(v) && v > out.grid_value) {
      out.grid_value = v;
      out.grid_argmax = x;
      best = g;
    }
  }
  require(best >= 0, ErrorCode::Convergence, "objective is non-finite on the whole grid");
  out.argmax = out.grid_argmax;
  out.value = out.grid_value;

  const double a = best == 0 ? lo : lo + (best - 1) * step;
  const double b = best + 1 == grid_points ? hi : std::min(hi, lo + (best + 1) * step);
  auto neg = [&f, &out](double x) {
    const double v = f(x);
    ++out.evaluations;
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  std::uintmax_t iters = max_iter;
  try {
    const auto [x, fx] = boost::math::tools::brent_find_minima(neg, a, b, bits, iters);
    out.polished = iters < max_iter;
    if (out.polished && -fx >= out.grid_value) {
      out.argmax = x;
      out.value = -fx;
    }
  } catch (const std::exception&) {
    out.polished = false;
  }
  return out;
}

}  // namespace hetsem
