#pragma once

// High-accuracy oracles for Phi and its derivatives, used as ground truth by
// tests and diagnostics. Not meant for use inside the algorithms.

#include "bilevel/problem.hpp"

namespace bilevel {

struct ReferenceOptions {
  Index dense_cap = 512;       // largest n for the dense lower-level solve
  int max_iterations = 1000000;
  double fd_step = 1e-5;
};

/// y with ||grad_y g(x, y)|| <= tol. Uses the analytic y* when available,
/// otherwise gradient descent with step 1/ell from zero.
/// Throws NonConvergence (carrying the residual) if the cap is hit.
Vector reference_ystar(const BilevelProblem& p, const Vector& x, double tol, const ReferenceOptions& opts = {});

double reference_phi(const BilevelProblem& p, const Vector& x, double tol, const ReferenceOptions& opts = {});

/// grad_x f - G_xy G_yy^{-1} grad_y f at y = reference_ystar(x), with G_yy
/// assembled column by column from Hessian-vector products and factored densely.
/// Throws InvalidArgument above the dense cap, SingularSystem if G_yy is not SPD.
Vector reference_hypergradient(const BilevelProblem& p, const Vector& x, double tol,
                               const ReferenceOptions& opts = {});

enum class HessianPath { FiniteDifference, Analytic };

/// Symmetrized central differences of reference_hypergradient with step h, or
/// the closed-form assembly from SecondOrderOracle.
Matrix reference_phi_hessian(const BilevelProblem& p, const Vector& x, double h,
                             HessianPath path = HessianPath::FiniteDifference, double tol = 1e-12,
                             const ReferenceOptions& opts = {});

}  // namespace bilevel
