#include "bilevel/constants.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bilevel/errors.hpp"

namespace bilevel {

void SmoothnessConstants::validate() const {
  const double fields[] = {mu, ell, rho, nu, m_bound, sigma2};
  for (double v : fields) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("smoothness constants must be finite and nonnegative");
    }
  }
  if (!(mu > 0.0)) throw InvalidArgument("mu must be positive");
  if (ell < mu) {
    throw InvalidArgument("ell (" + std::to_string(ell) + ") must be >= mu (" + std::to_string(mu) + ")");
  }
}

double compute_kappa(const SmoothnessConstants& c) { return c.ell / c.mu; }

double compute_l_phi(const SmoothnessConstants& c) {
  const double l = c.ell, mu = c.mu, rho = c.rho, m = c.m_bound;
  return l + (2.0 * l * l + rho * m * m) / mu + (l * l * l + 2.0 * rho * l * m) / (mu * mu) +
         rho * l * l * m / (mu * mu * mu);
}

double compute_rho_phi(const SmoothnessConstants& c) {
  const double l = c.ell, mu = c.mu, rho = c.rho, nu = c.nu, m = c.m_bound;
  const double mu2 = mu * mu, mu3 = mu2 * mu;
  const double s = 1.0 + l / mu;

  const double first = rho + (2.0 * l * rho + m * nu) / mu + (2.0 * m * l * nu + rho * l * l) / mu2 +
                       m * l * l * nu / mu3;
  const double second = 2.0 * l * rho / mu + (4.0 * m * rho * rho + 2.0 * l * l * rho) / mu2 +
                        2.0 * m * l * rho * rho / mu3;
  const double third = m * rho * rho / mu2 + rho * l / mu;
  return first * s + second * s * s + third * s * s * s;
}

DerivedConstants derive_constants(const SmoothnessConstants& c) {
  c.validate();
  return DerivedConstants{compute_kappa(c), compute_l_phi(c), compute_rho_phi(c)};
}

double effective_rho_phi(double rho_phi, double rho_floor) { return std::max(rho_phi, rho_floor); }

}  // namespace bilevel
