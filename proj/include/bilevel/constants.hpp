#pragma once

namespace bilevel {

/// Regularity constants of a bilevel problem (valid on the problem's declared box).
///
/// mu      strong-convexity modulus of g in y
/// ell     gradient Lipschitz constant of f and g
/// rho     Hessian / Jacobian Lipschitz constant
/// nu      Lipschitz constant of the third derivatives of g
/// m_bound bound on the gradient of f
/// sigma2  gradient variance bound (stochastic problems only)
struct SmoothnessConstants {
  double mu = 1.0;
  double ell = 1.0;
  double rho = 0.0;
  double nu = 0.0;
  double m_bound = 0.0;
  double sigma2 = 0.0;

  /// Throws InvalidArgument unless mu > 0, ell >= mu and all fields are finite and nonnegative.
  void validate() const;
};

/// Constants of Phi(x) = f(x, y*(x)) implied by SmoothnessConstants.
struct DerivedConstants {
  double kappa = 1.0;
  double l_phi = 0.0;
  double rho_phi = 0.0;
};

inline constexpr double kDefaultRhoFloor = 1e-3;

double compute_kappa(const SmoothnessConstants& c);

// Gradient Lipschitz constant of Phi:
//   ell + (2 ell^2 + rho M^2)/mu + (ell^3 + 2 rho ell M)/mu^2 + rho ell^2 M / mu^3
double compute_l_phi(const SmoothnessConstants& c);

// Hessian Lipschitz constant of Phi, a three-bracket sum in powers of (1 + ell/mu).
double compute_rho_phi(const SmoothnessConstants& c);

DerivedConstants derive_constants(const SmoothnessConstants& c);

/// max(rho_phi, rho_floor). Every formula dividing by sqrt(rho_phi * eps) uses this.
double effective_rho_phi(double rho_phi, double rho_floor = kDefaultRhoFloor);

}  // namespace bilevel
