#pragma once

#include <memory>

#include "bilevel/problem.hpp"
#include "bilevel/testbed.hpp"

namespace bilevel::testing {

// Forwards the first-order oracles but hides the closed forms, so code paths
// that must work on black-box problems are exercised.
class OpaqueProblem final : public BilevelProblem {
 public:
  explicit OpaqueProblem(std::shared_ptr<const BilevelProblem> inner) : inner_(std::move(inner)) {}
  Index dim_x() const override { return inner_->dim_x(); }
  Index dim_y() const override { return inner_->dim_y(); }
  double f(const Vector& x, const Vector& y) const override { return inner_->f(x, y); }
  double g(const Vector& x, const Vector& y) const override { return inner_->g(x, y); }
  Vector grad_x_f(const Vector& x, const Vector& y) const override { return inner_->grad_x_f(x, y); }
  Vector grad_y_f(const Vector& x, const Vector& y) const override { return inner_->grad_y_f(x, y); }
  Vector grad_y_g(const Vector& x, const Vector& y) const override { return inner_->grad_y_g(x, y); }
  Vector hvp_yy_g(const Vector& x, const Vector& y, const Vector& v) const override {
    return inner_->hvp_yy_g(x, y, v);
  }
  Vector jvp_xy_g(const Vector& x, const Vector& y, const Vector& v) const override {
    return inner_->jvp_xy_g(x, y, v);
  }
  const SmoothnessConstants& constants() const override { return inner_->constants(); }
  Structure structure() const override { return inner_->structure(); }

 private:
  std::shared_ptr<const BilevelProblem> inner_;
};

// f = 1/2 |x|^2, g = 1/2 |y|^2: no coupling, Phi = 1/2 |x|^2.
class SeparableProblem final : public BilevelProblem {
 public:
  SeparableProblem(Index d, Index n) : d_(d), n_(n) {
    c_.mu = 1.0;
    c_.ell = 1.0;
    c_.m_bound = 1.0;
  }
  Index dim_x() const override { return d_; }
  Index dim_y() const override { return n_; }
  double f(const Vector& x, const Vector&) const override { return 0.5 * x.squaredNorm(); }
  double g(const Vector&, const Vector& y) const override { return 0.5 * y.squaredNorm(); }
  Vector grad_x_f(const Vector& x, const Vector&) const override { return x; }
  Vector grad_y_f(const Vector&, const Vector&) const override { return Vector::Zero(n_); }
  Vector grad_y_g(const Vector&, const Vector& y) const override { return y; }
  Vector hvp_yy_g(const Vector&, const Vector&, const Vector& v) const override { return v; }
  Vector jvp_xy_g(const Vector&, const Vector&, const Vector&) const override { return Vector::Zero(d_); }
  const SmoothnessConstants& constants() const override { return c_; }

 private:
  Index d_, n_;
  SmoothnessConstants c_;
};

// Random quadratic-coupled problem with a quartic term and spectra chosen so
// every oracle is well conditioned.
std::shared_ptr<const QuadraticCoupledBilevel> random_coupled(Index d, Index n, std::uint64_t seed,
                                                               double kappa = 3.0, double quartic = 0.05);

// Random SPD matrix with eigenvalues spread evenly over [lo, hi].
Matrix random_spd(Index n, double lo, double hi, std::uint64_t seed);

Vector random_vector(Index n, std::uint64_t seed, double scale = 1.0);

}  // namespace bilevel::testing
