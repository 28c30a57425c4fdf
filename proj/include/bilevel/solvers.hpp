#pragma once

// Dense numerical kernels shared by the estimators: conjugate gradient, the
// truncated Neumann series, shifted power iteration and central differences.
// Operators are any callable `VectorX<Scalar>(const VectorX<Scalar>&)`.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "bilevel/errors.hpp"

namespace bilevel {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct CgReport {
  VectorX<Scalar> solution;
  int iterations = 0;
  Scalar residual_norm = Scalar(0);  // ||H solution - b||, recomputed after the last step
};

inline constexpr double kCgEarlyExitResidual = 1e-14;

/// N steps of conjugate gradient on hvp(v) = b starting from v0.
///
/// Stops early only once the residual drops below kCgEarlyExitResidual.
/// Throws NotPositiveDefinite if a search direction has p^T H p <= 0.
template <typename Scalar, typename Op>
CgReport<Scalar> cg_solve(const Op& hvp, const VectorX<Scalar>& b, const VectorX<Scalar>& v0, int max_steps) {
  if (max_steps < 0) throw InvalidArgument("cg_solve: negative step count");
  if (b.size() != v0.size()) throw InvalidArgument("cg_solve: dimension mismatch");

  CgReport<Scalar> report;
  VectorX<Scalar> x = v0;
  VectorX<Scalar> r = b - hvp(x);
  VectorX<Scalar> p = r;
  Scalar rs = r.squaredNorm();

  int it = 0;
  for (; it < max_steps; ++it) {
    if (std::sqrt(rs) < Scalar(kCgEarlyExitResidual)) break;
    const VectorX<Scalar> hp = hvp(p);
    const Scalar curvature = p.dot(hp);
    if (!(curvature > Scalar(0))) {
      throw NotPositiveDefinite("cg_solve: non-positive curvature p^T H p = " + std::to_string(double(curvature)));
    }
    const Scalar alpha = rs / curvature;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * hp;
    const Scalar rs_next = r.squaredNorm();
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }

  report.iterations = it;
  report.residual_norm = (hvp(x) - b).norm();
  report.solution = std::move(x);
  if (!report.solution.allFinite()) throw NumericalBlowup("cg_solve: non-finite iterate");
  return report;
}

/// Truncated Neumann series for H^{-1} v0 with per-term batch Hessians:
///
///   v_Q = eta * sum_{q=-1}^{Q-1} prod_{j=Q-q}^{Q} (I - eta H_j) v0,
///
/// where the empty product (q = -1) is the identity. `apply_batch(j, v)`
/// returns H_j v for j in 1..Q. The operator with the largest index acts on v0
/// first; each additional term multiplies one more factor on the left, so the
/// sum is built with Q operator applications.
template <typename Scalar, typename BatchOp>
VectorX<Scalar> neumann_inverse_hvp(const BatchOp& apply_batch, const VectorX<Scalar>& v0, Scalar eta, int depth) {
  if (depth < 0) throw InvalidArgument("neumann_inverse_hvp: negative depth");
  if (!(eta > Scalar(0))) throw InvalidArgument("neumann_inverse_hvp: eta must be positive");

  VectorX<Scalar> term = v0;
  VectorX<Scalar> sum = v0;
  for (int j = depth; j >= 1; --j) {
    term = term - eta * apply_batch(j, term);
    sum += term;
  }
  sum *= eta;
  if (!sum.allFinite()) throw NumericalBlowup("neumann_inverse_hvp: non-finite result");
  return sum;
}

template <typename Scalar>
struct EigenPair {
  Scalar value = Scalar(0);
  VectorX<Scalar> vector;
  int iterations = 0;
};

/// Smallest eigenvalue of a symmetric operator by power iteration on
/// (sigma I - H), where sigma must bound the spectral radius of H.
/// Converged once ||H v - lambda v|| <= tol. Throws NonConvergence otherwise.
template <typename Scalar, typename Op>
EigenPair<Scalar> min_eigenvalue(const Op& hvp, Eigen::Index dim, Scalar spectral_bound, Scalar tol,
                                 int max_iterations = 200000) {
  if (dim <= 0) throw InvalidArgument("min_eigenvalue: empty operator");
  if (!(tol > Scalar(0))) throw InvalidArgument("min_eigenvalue: tol must be positive");

  // Fixed start vector: a constant direction plus deterministic jitter so that
  // structured operators are unlikely to have it orthogonal to the target.
  VectorX<Scalar> v(dim);
  std::mt19937_64 jitter(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = Scalar(1) + Scalar(unit(jitter));
  v.normalize();

  EigenPair<Scalar> out;
  if (spectral_bound <= Scalar(0)) {
    // A zero spectral bound means the operator is identically zero.
    out.value = Scalar(0);
    out.vector = v;
    return out;
  }
  const Scalar sigma = spectral_bound * Scalar(1.001);

  Scalar lambda = Scalar(0);
  Scalar residual = std::numeric_limits<Scalar>::infinity();
  for (int it = 1; it <= max_iterations; ++it) {
    const VectorX<Scalar> hv = hvp(v);
    lambda = v.dot(hv);
    residual = (hv - lambda * v).norm();
    if (residual <= tol) {
      out.value = lambda;
      out.vector = v;
      out.iterations = it;
      return out;
    }
    VectorX<Scalar> w = sigma * v - hv;
    const Scalar norm = w.norm();
    if (!(norm > Scalar(0)) || !std::isfinite(double(norm))) {
      throw NumericalBlowup("min_eigenvalue: degenerate power iterate");
    }
    v = w / norm;
  }
  throw NonConvergence("min_eigenvalue: power iteration cap reached at lambda=" + std::to_string(double(lambda)),
                       double(residual));
}

/// Gershgorin bound on the spectral radius of a dense matrix.
template <typename Derived>
typename Derived::Scalar gershgorin_bound(const Eigen::MatrixBase<Derived>& h) {
  return h.cwiseAbs().rowwise().sum().maxCoeff();
}

template <typename Derived>
EigenPair<typename Derived::Scalar> min_eigenvalue(const Eigen::MatrixBase<Derived>& h, typename Derived::Scalar tol,
                                                   int max_iterations = 200000) {
  using Scalar = typename Derived::Scalar;
  if (h.rows() != h.cols()) throw InvalidArgument("min_eigenvalue: matrix must be square");
  const MatrixX<Scalar> dense = h;
  const auto op = [&dense](const VectorX<Scalar>& v) -> VectorX<Scalar> { return dense * v; };
  return min_eigenvalue<Scalar>(op, dense.rows(), gershgorin_bound(dense), tol, max_iterations);
}

/// Central-difference gradient of a scalar function.
template <typename Scalar, typename Fn>
VectorX<Scalar> central_difference_gradient(const Fn& fn, const VectorX<Scalar>& x, Scalar h) {
  VectorX<Scalar> grad(x.size());
  VectorX<Scalar> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Scalar up = fn(probe);
    probe[i] = x[i] - h;
    const Scalar down = fn(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (Scalar(2) * h);
  }
  return grad;
}

/// Central-difference Jacobian of a vector function; column i is d fn / d x_i.
template <typename Scalar, typename Fn>
MatrixX<Scalar> central_difference_jacobian(const Fn& fn, const VectorX<Scalar>& x, Scalar h) {
  MatrixX<Scalar> jac;
  VectorX<Scalar> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const VectorX<Scalar> up = fn(probe);
    probe[i] = x[i] - h;
    const VectorX<Scalar> down = fn(probe);
    probe[i] = x[i];
    if (i == 0) jac.resize(up.size(), x.size());
    jac.col(i) = (up - down) / (Scalar(2) * h);
  }
  return jac;
}

}  // namespace bilevel
