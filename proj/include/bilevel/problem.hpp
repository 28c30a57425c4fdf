#pragma once

#include <Eigen/Core>

#include "bilevel/constants.hpp"

namespace bilevel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Whether the lower level is an independent problem or the negated upper objective (g = -f).
enum class Structure { Bilevel, Minimax };

class AnalyticOracle;
class SecondOrderOracle;

/// min_x Phi(x) = f(x, y*(x))  s.t.  y*(x) = argmin_y g(x, y).
///
/// Block convention: the mixed derivative of g is the d x n matrix with entries
/// d^2 g / (dx_i dy_j), so jvp_xy_g(x, y, v) returns a d-vector.
///
/// Implementations are immutable after construction; every oracle is a pure
/// function of its arguments.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual Index dim_x() const = 0;
  virtual Index dim_y() const = 0;

  virtual double f(const Vector& x, const Vector& y) const = 0;
  virtual double g(const Vector& x, const Vector& y) const = 0;

  virtual Vector grad_x_f(const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_y_f(const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_y_g(const Vector& x, const Vector& y) const = 0;

  /// Hessian-vector product with the lower-level Hessian in y.
  virtual Vector hvp_yy_g(const Vector& x, const Vector& y, const Vector& v) const = 0;
  /// Jacobian-vector product with the mixed block of g.
  virtual Vector jvp_xy_g(const Vector& x, const Vector& y, const Vector& v) const = 0;

  virtual const SmoothnessConstants& constants() const = 0;

  virtual Structure structure() const { return Structure::Bilevel; }

  /// Closed-form y*, Phi, grad Phi, Hess Phi, when the problem has them.
  virtual const AnalyticOracle* analytic() const { return nullptr; }
  /// Second-derivative blocks used by the analytic Hessian assembly.
  virtual const SecondOrderOracle* second_order() const { return nullptr; }
};

class AnalyticOracle {
 public:
  virtual ~AnalyticOracle() = default;

  virtual Vector ystar(const Vector& x) const = 0;
  virtual double phi(const Vector& x) const = 0;
  virtual Vector grad_phi(const Vector& x) const = 0;
  virtual Matrix hess_phi(const Vector& x) const = 0;
};

/// Second-order information needed to assemble Hess Phi from its definition:
///   Hess Phi = F_xx + J F_yx + F_xy J^T + J F_yy J^T + sum_i (grad_y f)_i d^2 y*_i / dx^2
/// with J = dy*/dx (d x n) evaluated at y = y*(x).
class SecondOrderOracle {
 public:
  virtual ~SecondOrderOracle() = default;

  virtual Matrix hess_xx_f(const Vector& x, const Vector& y) const = 0;
  virtual Matrix hess_xy_f(const Vector& x, const Vector& y) const = 0;  // d x n
  virtual Matrix hess_yy_f(const Vector& x, const Vector& y) const = 0;
  /// dy*/dx as a d x n matrix.
  virtual Matrix ystar_jacobian(const Vector& x) const = 0;
  /// sum_i w_i d^2 y*_i / dx^2 (d x d).
  virtual Matrix ystar_curvature(const Vector& x, const Vector& w) const = 0;
};

/// Full second-order access to a minimax objective f(x, y) (max over y).
class MinimaxOracle {
 public:
  virtual ~MinimaxOracle() = default;

  virtual Vector minimax_grad_x(const Vector& x, const Vector& y) const = 0;
  virtual Vector minimax_grad_y(const Vector& x, const Vector& y) const = 0;
  virtual Matrix minimax_hess_xx(const Vector& x, const Vector& y) const = 0;
  virtual Matrix minimax_hess_xy(const Vector& x, const Vector& y) const = 0;  // d x n
  virtual Matrix minimax_hess_yy(const Vector& x, const Vector& y) const = 0;
};

}  // namespace bilevel
