#pragma once

namespace bilevel {

/// Step sizes, depths and batch sizes of the stochastic (finite-sum) estimator.
///
/// alpha        inner SGD step
/// beta         outer step
/// neumann_eta  step of the truncated Neumann series, must lie in (0, 1/ell]
/// inner_steps  D, number of inner SGD steps
/// neumann_depth Q
/// inner_batch  S, samples per inner SGD step
/// hessian_batch B, base size of the Neumann batch schedule
/// batch_f, batch_g  D_f and D_g
/// c_order      multiplier standing in for the constants hidden in O(.)
struct StocConfig {
  double alpha = 0.5;
  double beta = 0.01;
  double neumann_eta = 0.5;
  int inner_steps = 10;
  int neumann_depth = 10;
  int inner_batch = 16;
  int hessian_batch = 4;
  int batch_f = 16;
  int batch_g = 16;
  double c_order = 1.0;

  void validate() const;
};

}  // namespace bilevel
