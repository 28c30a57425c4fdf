#include "bilevel/hypergrad.hpp"

#include <algorithm>
#include <cmath>

#include "bilevel/errors.hpp"
#include "bilevel/inner_loops.hpp"
#include "bilevel/solvers.hpp"

namespace bilevel {

WarmStartState WarmStartState::start(const BilevelProblem& p, const Vector& y0, const Vector& v0) {
  if (y0.size() != p.dim_y() || v0.size() != p.dim_y()) throw InvalidArgument("WarmStartState: dimension mismatch");
  return WarmStartState{y0, v0};
}

WarmStartState WarmStartState::zeros(const BilevelProblem& p) {
  return WarmStartState{Vector::Zero(p.dim_y()), Vector::Zero(p.dim_y())};
}

HypergradEstimate gdmax_estimate(const BilevelProblem& p, const Vector& x, WarmStartState& state, double tau,
                                 int inner_steps) {
  if (p.structure() != Structure::Minimax) {
    throw InvalidArgument("gdmax_estimate: requires a minimax problem (g = -f)");
  }
  HypergradEstimate est;
  est.y_inner = inner_gd(p, x, state.y_prev, tau, inner_steps);
  est.grad = p.grad_x_f(x, est.y_inner);
  est.inner_residual = p.grad_y_g(x, est.y_inner).norm();
  if (!est.grad.allFinite()) throw NumericalBlowup("gdmax_estimate: non-finite estimate");
  state.y_prev = est.y_inner;
  return est;
}

HypergradEstimate aid_estimate(const BilevelProblem& p, const Vector& x, WarmStartState& state, double tau,
                               int inner_steps, int cg_steps) {
  HypergradEstimate est;
  est.y_inner = inner_gd(p, x, state.y_prev, tau, inner_steps);
  const Vector& y = est.y_inner;
  const auto hvp = [&](const Vector& v) -> Vector { return p.hvp_yy_g(x, y, v); };
  const CgReport<double> cg = cg_solve<double>(hvp, p.grad_y_f(x, y), state.v_prev, cg_steps);

  est.grad = p.grad_x_f(x, y) - p.jvp_xy_g(x, y, cg.solution);
  est.inner_residual = p.grad_y_g(x, y).norm();
  est.cg_residual = cg.residual_norm;
  est.v_inner = cg.solution;
  if (!est.grad.allFinite()) throw NumericalBlowup("aid_estimate: non-finite estimate");
  state.y_prev = est.y_inner;
  state.v_prev = cg.solution;
  return est;
}

HypergradEstimate stocbio_estimate(const FiniteSumBilevel& fs, const Vector& x, const Vector& y_d,
                                   const BatchPlan& plan, const StocConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(plan.d_h.size()) != cfg.neumann_depth) {
    throw InvalidArgument("stocbio_estimate: plan has " + std::to_string(plan.d_h.size()) +
                          " Hessian batches, expected " + std::to_string(cfg.neumann_depth));
  }
  const Vector v0 = fs.batch_grad_y_F(plan.d_f);
  const auto apply_batch = [&](int j, const Vector& v) -> Vector {
    return fs.batch_hvp_yy_G(v, plan.d_h[static_cast<std::size_t>(j - 1)]);
  };
  const Vector vq = neumann_inverse_hvp<double>(apply_batch, v0, cfg.neumann_eta, cfg.neumann_depth);

  HypergradEstimate est;
  est.grad = fs.batch_grad_x_F(x, y_d, plan.d_f) - fs.batch_jvp_xy_G(vq, plan.d_g);
  est.y_inner = y_d;
  est.v_inner = vq;
  est.inner_residual = fs.base().grad_y_g(x, y_d).norm();
  if (!est.grad.allFinite()) throw NumericalBlowup("stocbio_estimate: non-finite estimate");
  return est;
}

double aid_gamma1(const SmoothnessConstants& c, double eta, double delta_hat) {
  if (delta_hat < 0.0) throw InvalidArgument("aid_gamma1: delta_hat must be nonnegative");
  const double kappa = compute_kappa(c);
  const double m = c.m_bound;
  return delta_hat + 2.0 * eta * (kappa * kappa + 2.0 * kappa + c.rho * m * (1.0 + kappa) / (c.mu * c.mu)) *
                         (m + c.ell * m / c.mu);
}

namespace {

double gd_prefactor(const SmoothnessConstants& c) {
  const double kappa = compute_kappa(c);
  return (1.0 + (c.ell / c.mu) * (1.0 + 2.0 * std::sqrt(kappa))) * (c.ell + c.rho * c.m_bound / c.mu);
}

double cg_ratio(double kappa) {
  const double s = std::sqrt(kappa);
  return (s - 1.0) / (s + 1.0);
}

// ceil(log(target) / log(1/ratio)), 0 when the target is already met, 1 when ratio = 0.
int steps_for(double target, double ratio) {
  if (!(target > 1.0)) return 0;
  if (ratio <= 0.0) return 1;
  return static_cast<int>(std::ceil(std::log(target) / -std::log(ratio)));
}

}  // namespace

double aid_error_bound(const SmoothnessConstants& c, int inner_steps, int cg_steps, double gamma1) {
  if (gamma1 < 0.0) throw InvalidArgument("aid_error_bound: gamma1 must be nonnegative");
  if (inner_steps < 0 || cg_steps < 0) throw InvalidArgument("aid_error_bound: negative depth");
  const double kappa = compute_kappa(c);
  const double gd = gd_prefactor(c) * std::pow(1.0 - c.mu / c.ell, 0.5 * inner_steps);
  const double cg = 2.0 * c.ell * std::sqrt(kappa) * std::pow(cg_ratio(kappa), cg_steps);
  return (gd + cg) * gamma1;
}

AidDepths aid_depths(const SmoothnessConstants& c, double gamma1, double epsilon, double iota, DepthMode mode) {
  if (!(epsilon > 0.0)) throw InvalidArgument("aid_depths: epsilon must be positive");
  if (!(iota > 1.0)) throw InvalidIota("aid_depths: iota must satisfy iota > 1");
  const double kappa = compute_kappa(c);
  const double i2 = iota * iota;

  double margin = 0.0;
  if (mode == DepthMode::Descent) {
    margin = std::min(std::sqrt(17.0) / (80.0 * i2), 1.0 / (16.0 * i2 * std::pow(2.0, iota)));
  } else {
    margin = std::min({std::sqrt(17.0) / (40.0 * i2), 1.0 / (16.0 * i2 * std::pow(2.0, iota / 4.0)),
                       (std::cbrt(9.0) - 2.0) / (8.0 * iota), 1.0 / (750.0 * i2)});
  }
  const double threshold = margin * epsilon;
  // GD error contracts by (1 - 1/kappa) per step in squared form, hence the square root.
  const double gd_ratio = std::sqrt(1.0 - 1.0 / kappa);

  AidDepths out;
  double gd_target = 2.0 * gamma1 * gd_prefactor(c) / threshold;
  if (mode == DepthMode::Ineon) {
    const double l_phi = compute_l_phi(c);
    const double value_target = 750.0 * c.m_bound * l_phi * iota * i2 * gamma1 / (epsilon * epsilon);
    gd_target = std::max(gd_target, value_target);
  }
  out.inner_steps = steps_for(gd_target, gd_ratio);
  out.cg_steps = steps_for(4.0 * c.ell * std::sqrt(kappa) * gamma1 / threshold, cg_ratio(kappa));
  return out;
}

StocConfig stoc_schedule(const SmoothnessConstants& c, double epsilon, double c_order) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("stoc_schedule: epsilon must lie in (0, 1)");
  if (!(c_order > 0.0)) throw InvalidArgument("stoc_schedule: c_order must be positive");
  const double kappa = compute_kappa(c);
  const double inv_eps2 = 1.0 / (epsilon * epsilon);
  const auto size = [&](double v) {
    const double r = std::ceil(c_order * v);
    if (r > static_cast<double>(std::numeric_limits<int>::max())) {
      throw InvalidArgument("stoc_schedule: batch size overflows int");
    }
    return std::max(1, static_cast<int>(r));
  };

  StocConfig s;
  s.alpha = 2.0 / (c.ell + c.mu);
  s.beta = 1.0 / (4.0 * compute_l_phi(c));
  s.neumann_eta = 1.0 / c.ell;
  s.inner_steps = size(kappa * std::log(1.0 / epsilon));
  s.neumann_depth = s.inner_steps;
  s.hessian_batch = size(kappa * kappa * inv_eps2);
  s.inner_batch = size(std::pow(kappa, 5) * inv_eps2);
  s.batch_f = size(kappa * kappa * inv_eps2);
  s.batch_g = size(std::pow(kappa, 6) * inv_eps2);
  s.c_order = c_order;
  return s;
}

}  // namespace bilevel
