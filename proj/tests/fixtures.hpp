#pragma once

#include "hetsem/montecarlo.hpp"

namespace fixture {

inline hetsem::SimConfig grid_config(Eigen::Index side, double lambda, Eigen::VectorXd alpha) {
  hetsem::SimConfig c;
  c.grid_rows = c.grid_cols = side;
  c.lambda_true = lambda;
  c.alpha_true = std::move(alpha);
  return c;
}

inline Eigen::VectorXd vec3(double a, double b, double c) {
  return (Eigen::VectorXd(3) << a, b, c).finished();
}

// One replicate of the heteroskedastic SEM design on a side x side rook grid.
inline hetsem::ModelData sample(Eigen::Index side = 7, double lambda = 0.5,
                                Eigen::VectorXd alpha = vec3(0.0, -1.0, 1.0), std::uint64_t rep = 0,
                                std::uint64_t seed = 11) {
  auto c = grid_config(side, lambda, std::move(alpha));
  c.seed = seed;
  return hetsem::generate_sample(c, rep);
}

}  // namespace fixture
