#pragma once

#include <vector>

#include "bilevel/problem.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

struct PerturbConfig;

/// ApproxLocalMin:  ||grad Phi|| <= eps and lambda_min >= -sqrt(rho_phi_eff * eps)
/// StrictSaddle:    ||grad Phi|| <= eps and lambda_min <  -sqrt(rho_phi_eff * eps)
/// NonStationary:   ||grad Phi|| >  eps
struct PointClass {
  enum class Tag { ApproxLocalMin, StrictSaddle, NonStationary };
  Tag tag = Tag::NonStationary;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  double epsilon = 0.0;
  double curvature_threshold = 0.0;  // -sqrt(rho_phi_eff * eps)
};

const char* to_string(PointClass::Tag tag);

/// Uses the analytic grad Phi / Hess Phi when present, otherwise the reference
/// oracles (finite-difference Hessian).
PointClass classify_point(const BilevelProblem& p, const Vector& x, double epsilon, double rho_phi_eff);

struct MinimaxTolerances {
  double definiteness = 1e-8;  // eigenvalue sign margin, relative to 1 + ||block||
  double stationarity = 1e-8;  // relative to 1 + grad_scale
  double grad_scale = 0.0;
};

struct MinimaxClass {
  bool is_stationary = false;
  bool yy_negdef = false;
  bool xx_posdef = false;
  bool schur_posdef = false;
  bool strict_local_nash = false;     // stationary, yy negative definite, xx positive definite
  bool strict_local_minimax = false;  // stationary, yy negative definite, Schur complement positive definite
};

/// Throws SingularSystem if the yy block is numerically singular.
MinimaxClass classify_minimax_point(const MinimaxOracle& f, const Vector& x, const Vector& y,
                                    const MinimaxTolerances& tol = {});

/// True iff some perturbation at iteration k satisfies phi[k + T] - phi[k] <= -F/2.
/// phi_series[i] must correspond to trace.records[i]; throws MisalignedSeries otherwise.
bool escape_event(const RunTrace& trace, const PerturbConfig& cfg, const std::vector<double>& phi_series);

enum class FitSpace { Semilog, Loglog };

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (x, log y) (semilog) or (log x, log y) (loglog).
/// Throws DegenerateFit with fewer than 3 points or zero spread in x.
RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys, FitSpace space);

}  // namespace bilevel
