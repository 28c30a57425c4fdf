#include "bilevel/escape.hpp"

#include <cmath>
#include <string>

#include "bilevel/diagnostics.hpp"
#include "bilevel/errors.hpp"
#include "bilevel/inner_loops.hpp"

namespace bilevel {

void PerturbConfig::validate() const {
  if (!(iota > 1.0)) throw InvalidIota("iota must satisfy iota > 1 (got " + format_double(iota) + ")");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (!(eta > 0.0) || !(tau > 0.0)) throw InvalidArgument("step sizes must be positive");
  if (!(r >= 0.0)) throw InvalidArgument("perturbation radius must be nonnegative");
  if (t_script < 1) throw InvalidArgument("escape window must be >= 1");
  if (!(f_script > 0.0)) throw InvalidArgument("decrease threshold must be positive");
  if (d_inner < 0 || n_cg < 0) throw InvalidArgument("inner depths must be nonnegative");
  if (!(rho_phi_eff > 0.0)) throw InvalidArgument("rho_phi_eff must be positive");
}

double implied_delta(double l_phi, double rho_phi_eff, double epsilon, double iota, Index dim) {
  if (dim <= 0) return 0.0;
  return l_phi * std::sqrt(static_cast<double>(dim)) / std::sqrt(rho_phi_eff * epsilon) * iota * iota *
         std::pow(2.0, 8.0 - iota);
}

PerturbConfig theory_params(const SmoothnessConstants& c, double epsilon, double iota, double delta, ParamMode mode,
                            const TheoryOptions& opts) {
  return theory_params(c, derive_constants(c), epsilon, iota, delta, mode, opts);
}

PerturbConfig theory_params(const SmoothnessConstants& c, const DerivedConstants& dc, double epsilon, double iota,
                            double delta, ParamMode mode, const TheoryOptions& opts) {
  if (!(iota > 1.0)) throw InvalidIota("iota must satisfy iota > 1 (got " + format_double(iota) + ")");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(opts.c_order > 0.0)) throw InvalidArgument("c_order must be positive");
  c.validate();

  PerturbConfig cfg;
  cfg.mode = mode;
  cfg.epsilon = epsilon;
  cfg.iota = iota;
  cfg.delta = delta;
  cfg.rho_phi_eff = effective_rho_phi(dc.rho_phi, opts.rho_floor);
  cfg.tau = 1.0 / c.ell;
  cfg.eta = 1.0 / dc.l_phi;
  const double i3 = iota * iota * iota;
  cfg.r = epsilon / (400.0 * i3);

  const double sqrt_rho_eps = std::sqrt(cfg.rho_phi_eff * epsilon);
  const double window = dc.l_phi / sqrt_rho_eps * (mode == ParamMode::Alg1 ? iota : iota / 4.0);
  cfg.t_script = static_cast<long>(std::ceil(window));
  const double decrease = std::sqrt(epsilon * epsilon * epsilon / cfg.rho_phi_eff);
  cfg.f_script = decrease / ((mode == ParamMode::Alg1 ? 100.0 : 25.0) * i3);
  cfg.s_script = std::sqrt(epsilon / cfg.rho_phi_eff) / (4.0 * iota);

  const double log_term = std::max(0.0, std::log(1.0 / epsilon));
  cfg.d_inner = static_cast<int>(std::ceil(opts.c_order * dc.kappa * log_term));
  cfg.n_cg = static_cast<int>(std::ceil(opts.c_order * std::sqrt(dc.kappa) * log_term));
  cfg.delta_implied = implied_delta(dc.l_phi, cfg.rho_phi_eff, epsilon, iota, opts.dim);
  return cfg;
}

const char* to_string(HypergradOption option) {
  switch (option) {
    case HypergradOption::GDmax:
      return "GDmax";
    case HypergradOption::AID:
      return "AID";
    case HypergradOption::Exact:
      return "Exact";
  }
  return "unknown";
}

namespace {

std::optional<double> exact_phi(const BilevelProblem& p, const Vector& x) {
  if (const AnalyticOracle* oracle = p.analytic()) return oracle->phi(x);
  return std::nullopt;
}

bool certified(const BilevelProblem& p, const Vector& x, const PerturbConfig& cfg) {
  const AnalyticOracle* oracle = p.analytic();
  if (!oracle) return false;
  if (oracle->grad_phi(x).norm() > cfg.epsilon) return false;
  return classify_point(p, x, cfg.epsilon, cfg.rho_phi_eff).tag == PointClass::Tag::ApproxLocalMin;
}

bool snapshot_due(const RunOptions& opts, long k) { return opts.snapshot_stride > 0 && k % opts.snapshot_stride == 0; }

}  // namespace

RunTrace perturbed_descent(const BilevelProblem& p, const Vector& x0, const Vector& y0, const Vector& v0,
                           const PerturbConfig& cfg, HypergradOption option, long max_iters, Rng& rng,
                           const RunOptions& opts) {
  cfg.validate();
  if (max_iters < 1) throw InvalidArgument("perturbed_descent: need at least one iteration");
  if (x0.size() != p.dim_x()) throw InvalidArgument("perturbed_descent: x0 has the wrong dimension");
  if (option == HypergradOption::GDmax && p.structure() != Structure::Minimax) {
    throw InvalidArgument("perturbed_descent: GDmax requires a minimax problem");
  }
  if (option == HypergradOption::Exact && !p.analytic()) {
    throw InvalidArgument("perturbed_descent: exact option requires an analytic oracle");
  }

  RunTrace trace;
  trace.seed = opts.seed;
  WarmStartState state = WarmStartState::start(p, y0, v0);
  Vector x = x0;
  long k_perturb = 0;

  for (long k = 0; k < max_iters; ++k) {
    TraceRecord rec;
    rec.k = k;
    rec.phi = exact_phi(p, x);
    if (snapshot_due(opts, k)) rec.x_snapshot = x;

    if (opts.certified_exit && certified(p, x, cfg)) {
      rec.phase = "certified";
      rec.grad_est_norm = p.analytic()->grad_phi(x).norm();
      rec.k_perturb = k_perturb;
      trace.records.push_back(std::move(rec));
      trace.status = RunStatus::LocalMinCertified;
      trace.x_final = x;
      return trace;
    }

    HypergradEstimate est;
    try {
      switch (option) {
        case HypergradOption::GDmax:
          est = gdmax_estimate(p, x, state, cfg.tau, cfg.d_inner);
          break;
        case HypergradOption::AID:
          est = aid_estimate(p, x, state, cfg.tau, cfg.d_inner, cfg.n_cg);
          break;
        case HypergradOption::Exact:
          est.grad = p.analytic()->grad_phi(x);
          break;
      }
    } catch (const NumericalError& e) {
      trace.failure = e.what();
      trace.x_final = x;
      return trace;
    }

    rec.phase = "descent";
    rec.grad_est_norm = est.grad.norm();
    Vector x_from = x;
    if (rec.grad_est_norm <= 0.8 * cfg.epsilon && k - k_perturb > cfg.t_script) {
      x_from -= cfg.eta * sample_uniform_ball<double>(p.dim_x(), cfg.r, rng);
      k_perturb = k;
      rec.perturbed = true;
      trace.perturbation_iterations.push_back(k);
    }
    rec.k_perturb = k_perturb;
    Vector x_next = x_from - cfg.eta * est.grad;

    if (opts.observer) {
      StepInfo info;
      info.k = k;
      info.x_k = &x;
      info.x_from = &x_from;
      info.x_next = &x_next;
      info.grad_est = &est.grad;
      info.perturbed = rec.perturbed;
      opts.observer(info);
    }
    trace.records.push_back(std::move(rec));
    x = std::move(x_next);
    if (!x.allFinite()) {
      trace.failure = "perturbed_descent: non-finite iterate";
      break;
    }
  }
  trace.x_final = x;
  return trace;
}

AidOracle::AidOracle(const BilevelProblem& p, const Vector& y0, const Vector& v0, double tau, int inner_steps,
                     int cg_steps)
    : p_(p), state_(WarmStartState::start(p, y0, v0)), tau_(tau), inner_steps_(inner_steps), cg_steps_(cg_steps) {}

void AidOracle::evaluate(const Vector& z) {
  if (cached_ && z.size() == z_.size() && z == z_) return;
  est_ = aid_estimate(p_, z, state_, tau_, inner_steps_, cg_steps_);
  phi_ = p_.f(z, est_.y_inner);
  z_ = z;
  cached_ = true;
  ++evaluations_;
}

Vector AidOracle::grad(const Vector& z) {
  evaluate(z);
  return est_.grad;
}

double AidOracle::phi(const Vector& z) {
  evaluate(z);
  return phi_;
}

IneonResult ineon(const GradOracle& grad_oracle, const PhiOracle& phi_oracle, const Vector& x_tilde,
                  const PerturbConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index d = x_tilde.size();
  const Vector g0 = grad_oracle(x_tilde);
  const double phi0 = phi_oracle(x_tilde);
  const double threshold = -kIneonDecreaseFraction * cfg.f_script;

  IneonResult out;
  Vector u = sample_uniform_ball<double>(d, cfg.eta * cfg.r, rng);
  for (long k = 0; k < cfg.t_script; ++k) {
    u -= cfg.eta * (grad_oracle(x_tilde + u) - g0);
    if (!u.allFinite()) throw NumericalBlowup("ineon: non-finite iterate");
    out.iterations = static_cast<int>(k + 1);
    const double curvature = phi_oracle(x_tilde + u) - phi0 - g0.dot(u);
    if (curvature <= threshold) {
      out.direction = u / u.norm();
      out.found = true;
      return out;
    }
  }
  out.direction = Vector::Zero(d);
  return out;
}

RunTrace stocbio_ineon(const FiniteSumBilevel& fs, const Vector& x0, const Vector& y0, const PerturbConfig& cfg,
                       const StocConfig& scfg, long max_iters, Rng& rng, const RunOptions& opts) {
  cfg.validate();
  scfg.validate();
  if (max_iters < 1) throw InvalidArgument("stocbio_ineon: need at least one iteration");
  if (x0.size() != fs.dim_x() || y0.size() != fs.dim_y()) throw InvalidArgument("stocbio_ineon: dimension mismatch");

  const QuadraticCoupledBilevel& base = fs.base();
  const double curvature_step = std::sqrt(cfg.epsilon / cfg.rho_phi_eff) / 80.0;

  RunTrace trace;
  trace.seed = opts.seed;
  Vector x = x0;
  Vector y = y0;
  long k = 0;

  try {
    while (k < max_iters) {
      const BatchPlan plan = sample_batches(fs, scfg, rng);
      y = inner_sgd(fs, x, y, scfg.alpha, plan.s_batches);
      const HypergradEstimate est = stocbio_estimate(fs, x, y, plan, scfg);

      TraceRecord rec;
      rec.k = k;
      rec.phase = "stoc";
      rec.grad_est_norm = est.grad.norm();
      rec.phi = base.phi(x);
      if (snapshot_due(opts, k)) rec.x_snapshot = x;
      trace.records.push_back(std::move(rec));
      x -= scfg.beta * est.grad;
      ++k;
      if (!x.allFinite()) throw NumericalBlowup("stocbio_ineon: non-finite iterate");
      if (k >= max_iters) break;

      // Stationarity check and curvature search on the frozen batch problem.
      const auto batch = fs.batch_problem(plan.d_f, plan.d_g);
      AidOracle oracle(*batch, y, Vector::Zero(fs.dim_y()), cfg.tau, cfg.d_inner, cfg.n_cg);
      const double check_norm = oracle.grad(x).norm();
      if (check_norm > 0.8 * cfg.epsilon) continue;

      const IneonResult neon = ineon([&](const Vector& z) { return oracle.grad(z); },
                                     [&](const Vector& z) { return oracle.phi(z); }, x, cfg, rng);
      trace.neon_events.push_back(NeonEvent{k, neon.found, neon.iterations});

      TraceRecord step;
      step.k = k;
      step.grad_est_norm = check_norm;
      step.phi = base.phi(x);
      if (snapshot_due(opts, k)) step.x_snapshot = x;
      if (!neon.found) {
        step.phase = "certified";
        trace.records.push_back(std::move(step));
        trace.status = RunStatus::LocalMinCertified;
        trace.x_final = x;
        return trace;
      }
      step.phase = "curvature";
      trace.records.push_back(std::move(step));
      const int xi = sample_rademacher(rng);
      x -= (xi * curvature_step) * neon.direction;
      ++k;
    }
  } catch (const NumericalError& e) {
    trace.failure = e.what();
  }
  trace.x_final = x;
  return trace;
}

}  // namespace bilevel
