#include "bilevel/reference.hpp"

#include <string>

#include <Eigen/Cholesky>

#include "bilevel/errors.hpp"
#include "bilevel/solvers.hpp"

namespace bilevel {

Vector reference_ystar(const BilevelProblem& p, const Vector& x, double tol, const ReferenceOptions& opts) {
  if (!(tol > 0.0)) throw InvalidArgument("reference_ystar: tol must be positive");
  if (const AnalyticOracle* oracle = p.analytic()) return oracle->ystar(x);

  const double step = 1.0 / p.constants().ell;
  Vector y = Vector::Zero(p.dim_y());
  double residual = 0.0;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Vector grad = p.grad_y_g(x, y);
    residual = grad.norm();
    if (residual <= tol) return y;
    if (!std::isfinite(residual)) throw NumericalBlowup("reference_ystar: non-finite residual");
    y -= step * grad;
  }
  throw NonConvergence("reference_ystar: iteration cap reached", residual);
}

double reference_phi(const BilevelProblem& p, const Vector& x, double tol, const ReferenceOptions& opts) {
  if (const AnalyticOracle* oracle = p.analytic()) return oracle->phi(x);
  return p.f(x, reference_ystar(p, x, tol, opts));
}

Vector reference_hypergradient(const BilevelProblem& p, const Vector& x, double tol, const ReferenceOptions& opts) {
  const Index n = p.dim_y();
  if (n > opts.dense_cap) {
    throw InvalidArgument("reference_hypergradient: n = " + std::to_string(n) + " exceeds the dense cap");
  }
  const Vector y = reference_ystar(p, x, tol, opts);

  Matrix h(n, n);
  Vector unit = Vector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    unit[j] = 1.0;
    h.col(j) = p.hvp_yy_g(x, y, unit);
    unit[j] = 0.0;
  }
  h = 0.5 * (h + h.transpose());
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw SingularSystem("reference_hypergradient: lower-level Hessian is not SPD");

  const Vector v = llt.solve(p.grad_y_f(x, y));
  return p.grad_x_f(x, y) - p.jvp_xy_g(x, y, v);
}

namespace {

Matrix analytic_hessian(const BilevelProblem& p, const Vector& x, double tol, const ReferenceOptions& opts) {
  const SecondOrderOracle* so = p.second_order();
  if (!so) throw InvalidArgument("reference_phi_hessian: problem has no second-order oracle");
  const Vector y = reference_ystar(p, x, tol, opts);
  const Matrix jac = so->ystar_jacobian(x);  // d x n
  const Matrix fxy = so->hess_xy_f(x, y);
  Matrix h = so->hess_xx_f(x, y) + jac * fxy.transpose() + fxy * jac.transpose() +
             jac * so->hess_yy_f(x, y) * jac.transpose() + so->ystar_curvature(x, p.grad_y_f(x, y));
  return 0.5 * (h + h.transpose());
}

}  // namespace

Matrix reference_phi_hessian(const BilevelProblem& p, const Vector& x, double h, HessianPath path, double tol,
                             const ReferenceOptions& opts) {
  if (!(h > 0.0)) throw InvalidArgument("reference_phi_hessian: step must be positive");
  if (path == HessianPath::Analytic) return analytic_hessian(p, x, tol, opts);

  const auto grad = [&](const Vector& z) { return reference_hypergradient(p, z, tol, opts); };
  const Matrix jac = central_difference_jacobian<double>(grad, x, h);
  return 0.5 * (jac + jac.transpose());
}

}  // namespace bilevel
