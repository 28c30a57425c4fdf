#pragma once

#include <cstdint>
#include <functional>

#include "bilevel/constants.hpp"
#include "bilevel/hypergrad.hpp"
#include "bilevel/problem.hpp"
#include "bilevel/random.hpp"
#include "bilevel/stoc_config.hpp"
#include "bilevel/testbed.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

enum class ParamMode { Alg1, Ineon };

/// Tuned scalars of the escape algorithms.
///
/// t_script  escape window (iterations)
/// f_script  required decrease
/// s_script  localization radius
struct PerturbConfig {
  double epsilon = 1e-2;
  double iota = 2.0;
  double delta = 0.1;
  double delta_implied = 0.0;  // L_phi sqrt(d) / sqrt(rho_phi eps) * iota^2 * 2^(8 - iota), 0 if d unknown
  double eta = 0.25;
  double tau = 1.0;
  double r = 0.0;
  long t_script = 1;
  double f_script = 0.0;
  double s_script = 0.0;
  int d_inner = 0;
  int n_cg = 0;
  double rho_phi_eff = kDefaultRhoFloor;
  ParamMode mode = ParamMode::Alg1;

  /// Throws InvalidIota for iota <= 1, InvalidArgument for other out-of-range fields.
  void validate() const;
};

struct TheoryOptions {
  double rho_floor = kDefaultRhoFloor;
  double c_order = 1.0;
  Index dim = 0;  // dimension of x, only used for delta_implied
};

/// tau = 1/ell, eta = 1/L_phi, r = eps / (400 iota^3),
/// Alg1:  T = L_phi / sqrt(rho eps) * iota,     F = sqrt(eps^3 / rho) / (100 iota^3)
/// Ineon: T = L_phi / sqrt(rho eps) * iota / 4, F = sqrt(eps^3 / rho) / (25 iota^3)
/// S = sqrt(eps / rho) / (4 iota), D = ceil(c kappa log(1/eps)), N = ceil(c sqrt(kappa) log(1/eps)),
/// with rho = max(rho_phi, rho_floor) and T rounded up.
PerturbConfig theory_params(const SmoothnessConstants& c, double epsilon, double iota, double delta, ParamMode mode,
                            const TheoryOptions& opts = {});
PerturbConfig theory_params(const SmoothnessConstants& c, const DerivedConstants& dc, double epsilon, double iota,
                            double delta, ParamMode mode, const TheoryOptions& opts = {});

double implied_delta(double l_phi, double rho_phi_eff, double epsilon, double iota, Index dim);

enum class HypergradOption { GDmax, AID, Exact };

const char* to_string(HypergradOption option);

/// Passed to the observer after the update of step k has been formed.
struct StepInfo {
  long k = 0;
  const Vector* x_k = nullptr;     // iterate at the start of step k
  const Vector* x_from = nullptr;  // after the perturbation (== x_k when none)
  const Vector* x_next = nullptr;  // x_from - eta * grad_est
  const Vector* grad_est = nullptr;
  bool perturbed = false;
};

struct RunOptions {
  /// Stop as soon as the analytic oracle certifies an eps-local minimum (testbed problems only).
  bool certified_exit = false;
  /// Store x_k in every stride-th record; 0 disables snapshots.
  int snapshot_stride = 0;
  std::uint64_t seed = 0;  // copied into the trace
  std::function<void(const StepInfo&)> observer;
};

/// Perturbed inexact gradient descent on Phi. Numerical failures of the
/// estimator end the run; the message is kept in trace.failure.
RunTrace perturbed_descent(const BilevelProblem& p, const Vector& x0, const Vector& y0, const Vector& v0,
                           const PerturbConfig& cfg, HypergradOption option, long max_iters, Rng& rng,
                           const RunOptions& opts = {});

/// AID estimates with warm start carried between queries. Each new query point
/// runs D inner GD steps and N CG steps once; repeated queries at the same point
/// are served from the cache. phi(z) = f(z, y^D(z)).
class AidOracle {
 public:
  AidOracle(const BilevelProblem& p, const Vector& y0, const Vector& v0, double tau, int inner_steps, int cg_steps);

  Vector grad(const Vector& z);
  double phi(const Vector& z);
  long evaluations() const { return evaluations_; }

 private:
  void evaluate(const Vector& z);

  const BilevelProblem& p_;
  WarmStartState state_;
  double tau_;
  int inner_steps_;
  int cg_steps_;
  bool cached_ = false;
  Vector z_;
  HypergradEstimate est_;
  double phi_ = 0.0;
  long evaluations_ = 0;
};

struct IneonResult {
  Vector direction;  // unit vector, or zero when no negative curvature was detected
  int iterations = 0;
  bool found = false;
};

using GradOracle = std::function<Vector(const Vector&)>;
using PhiOracle = std::function<double(const Vector&)>;

/// Noise-driven power iteration on I - eta Hess Phi using gradient differences.
/// Returns u/||u|| once phi(x + u) - phi(x) - grad(x)^T u <= -(11519/12800) F, or
/// zero after cfg.t_script iterations.
IneonResult ineon(const GradOracle& grad_oracle, const PhiOracle& phi_oracle, const Vector& x_tilde,
                  const PerturbConfig& cfg, Rng& rng);

inline constexpr double kIneonDecreaseFraction = 11519.0 / 12800.0;

/// Stochastic outer loop with a batch-AID stationarity check and iNEON calls
/// on the frozen batch problem. A zero iNEON direction ends the run with
/// LocalMinCertified; otherwise x moves by +-(1/80) sqrt(eps / rho_phi_eff) u.
RunTrace stocbio_ineon(const FiniteSumBilevel& fs, const Vector& x0, const Vector& y0, const PerturbConfig& cfg,
                       const StocConfig& scfg, long max_iters, Rng& rng, const RunOptions& opts = {});

}  // namespace bilevel
