#pragma once

#include <limits>
#include <optional>

#include "bilevel/constants.hpp"
#include "bilevel/problem.hpp"
#include "bilevel/stoc_config.hpp"
#include "bilevel/testbed.hpp"

namespace bilevel {

/// Inner iterates carried between outer iterations.
struct WarmStartState {
  Vector y_prev;
  Vector v_prev;

  static WarmStartState start(const BilevelProblem& p, const Vector& y0, const Vector& v0);
  static WarmStartState zeros(const BilevelProblem& p);
};

struct HypergradEstimate {
  Vector grad;
  Vector y_inner;
  std::optional<Vector> v_inner;
  double inner_residual = 0.0;  // ||grad_y g(x, y_inner)||
  double cg_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Danskin estimate grad_x f(x, y^D) after D ascent steps on f from state.y_prev
/// (descent on g = -f). Requires Structure::Minimax. Updates state.y_prev.
HypergradEstimate gdmax_estimate(const BilevelProblem& p, const Vector& x, WarmStartState& state, double tau,
                                 int inner_steps);

/// Approximate implicit differentiation: D GD steps from state.y_prev, N CG steps on
/// G_yy v = grad_y f from state.v_prev, then grad_x f - G_xy v. Updates state.
HypergradEstimate aid_estimate(const BilevelProblem& p, const Vector& x, WarmStartState& state, double tau,
                               int inner_steps, int cg_steps);

/// Minibatch estimate grad_x F(D_F) - G_xy(D_G) v_Q with v_Q the truncated
/// Neumann series over the batch Hessians in plan.d_h.
HypergradEstimate stocbio_estimate(const FiniteSumBilevel& fs, const Vector& x, const Vector& y_d,
                                   const BatchPlan& plan, const StocConfig& cfg);

/// Gamma_1 = delta_hat + 2 eta (kappa^2 + 2 kappa + rho M (1 + kappa)/mu^2)(M + ell M / mu),
/// with delta_hat = ||y0 - y*(x0)|| + ||v0 - v*_0||.
double aid_gamma1(const SmoothnessConstants& c, double eta, double delta_hat);

/// Upper bound on ||grad_hat - grad Phi|| for AID with depths (D, N):
///   [(1 + (ell/mu)(1 + 2 sqrt(kappa)))(ell + rho M / mu)(1 - mu/ell)^(D/2)
///    + 2 ell sqrt(kappa) ((sqrt(kappa) - 1)/(sqrt(kappa) + 1))^N] * Gamma_1
double aid_error_bound(const SmoothnessConstants& c, int inner_steps, int cg_steps, double gamma1);

enum class DepthMode { Descent, Ineon };

struct AidDepths {
  int inner_steps = 0;
  int cg_steps = 0;
};

/// Explicit (D, N) making the AID bound small enough for the escape analysis.
/// Descent mode uses the threshold min{sqrt(17)/(80 iota^2), 1/(16 iota^2 2^iota)} * eps;
/// Ineon mode the four-way minimum together with the function-value condition.
AidDepths aid_depths(const SmoothnessConstants& c, double gamma1, double epsilon, double iota, DepthMode mode);

/// Order-level schedule for the stochastic estimator with every hidden constant set to c_order:
/// alpha = 2/(ell + mu), beta = 1/(4 L_phi), D = Q = kappa log(1/eps), B = kappa^2 / eps^2,
/// S = kappa^5 / eps^2, D_f = kappa^2 / eps^2, D_g = kappa^6 / eps^2 (all rounded up).
StocConfig stoc_schedule(const SmoothnessConstants& c, double epsilon, double c_order = 1.0);

}  // namespace bilevel
