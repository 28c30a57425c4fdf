#pragma once

// Synthetic problems with closed-form Phi, grad Phi and Hess Phi.
//
// Every testbed problem declares a box [-R, R]^d for x. Its SmoothnessConstants
// are bounds valid on that box (and on y*(box)), since the quartic upper
// objectives are not globally Lipschitz.

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bilevel/problem.hpp"
#include "bilevel/random.hpp"
#include "bilevel/stoc_config.hpp"

namespace bilevel {

/// f(x, y) = quartic * sum x_i^4 + 1/2 x^T P x + p_lin^T x + a^T y
/// g(x, y) = 1/2 y^T Q y - y^T (B x + c)
///
/// y*(x) = Q^{-1}(B x + c) and Phi(x) = quartic * sum x_i^4 + 1/2 x^T P x + p_lin^T x + a^T y*(x).
class QuadraticCoupledBilevel final : public BilevelProblem, public AnalyticOracle, public SecondOrderOracle {
 public:
  struct Data {
    Matrix Q;          // n x n, SPD
    Matrix B;          // n x d
    Vector c;          // n
    Matrix P_upper;    // d x d, symmetric
    double quartic_coef = 0.0;
    Vector a;          // n
    Vector p_lin;      // d; empty means zero
    double box_radius = 1.0;
  };

  /// Constants are computed over the declared box.
  explicit QuadraticCoupledBilevel(Data data);
  /// Constants supplied by the caller (e.g. loaded from a problem file).
  QuadraticCoupledBilevel(Data data, const SmoothnessConstants& constants);

  const Data& data() const { return data_; }
  /// B^T Q^{-1} a, the constant contribution of the lower level to grad Phi.
  const Vector& coupling_gradient() const { return coupling_; }

  Index dim_x() const override { return data_.B.cols(); }
  Index dim_y() const override { return data_.B.rows(); }

  double f(const Vector& x, const Vector& y) const override;
  double g(const Vector& x, const Vector& y) const override;
  Vector grad_x_f(const Vector& x, const Vector& y) const override;
  Vector grad_y_f(const Vector& x, const Vector& y) const override;
  Vector grad_y_g(const Vector& x, const Vector& y) const override;
  Vector hvp_yy_g(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector jvp_xy_g(const Vector& x, const Vector& y, const Vector& v) const override;
  const SmoothnessConstants& constants() const override { return constants_; }

  const AnalyticOracle* analytic() const override { return this; }
  const SecondOrderOracle* second_order() const override { return this; }

  Vector ystar(const Vector& x) const override;
  double phi(const Vector& x) const override;
  Vector grad_phi(const Vector& x) const override;
  Matrix hess_phi(const Vector& x) const override;

  Matrix hess_xx_f(const Vector& x, const Vector& y) const override;
  Matrix hess_xy_f(const Vector& x, const Vector& y) const override;
  Matrix hess_yy_f(const Vector& x, const Vector& y) const override;
  Matrix ystar_jacobian(const Vector& x) const override;
  Matrix ystar_curvature(const Vector& x, const Vector& w) const override;

 private:
  void init();

  Data data_;
  Eigen::LLT<Matrix> q_llt_;
  Vector coupling_;
  SmoothnessConstants constants_;
};

SmoothnessConstants box_constants(const QuadraticCoupledBilevel::Data& data);

/// f(x, y) = quartic * sum x_i^4 + 1/2 x^T A x + x^T B y - 1/2 y^T C y, maximized over y.
///
/// Seen as a bilevel problem the lower level is g = -f, so y*(x) = C^{-1} B^T x and
/// Phi(x) = quartic * sum x_i^4 + 1/2 x^T (A + B C^{-1} B^T) x.
class MinimaxQuadratic final : public BilevelProblem,
                               public AnalyticOracle,
                               public SecondOrderOracle,
                               public MinimaxOracle {
 public:
  struct Data {
    Matrix A_x;  // d x d, symmetric, possibly indefinite
    Matrix B;    // d x n
    Matrix C;    // n x n, SPD
    double quartic_coef = 0.0;
    double box_radius = 1.0;
  };

  explicit MinimaxQuadratic(Data data);
  MinimaxQuadratic(Data data, const SmoothnessConstants& constants);

  const Data& data() const { return data_; }
  /// A + B C^{-1} B^T.
  const Matrix& schur_matrix() const { return schur_; }

  Index dim_x() const override { return data_.B.rows(); }
  Index dim_y() const override { return data_.B.cols(); }
  Structure structure() const override { return Structure::Minimax; }

  double f(const Vector& x, const Vector& y) const override;
  double g(const Vector& x, const Vector& y) const override { return -f(x, y); }
  Vector grad_x_f(const Vector& x, const Vector& y) const override;
  Vector grad_y_f(const Vector& x, const Vector& y) const override;
  Vector grad_y_g(const Vector& x, const Vector& y) const override;
  Vector hvp_yy_g(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector jvp_xy_g(const Vector& x, const Vector& y, const Vector& v) const override;
  const SmoothnessConstants& constants() const override { return constants_; }

  const AnalyticOracle* analytic() const override { return this; }
  const SecondOrderOracle* second_order() const override { return this; }

  Vector ystar(const Vector& x) const override;
  double phi(const Vector& x) const override;
  Vector grad_phi(const Vector& x) const override;
  Matrix hess_phi(const Vector& x) const override;

  Matrix hess_xx_f(const Vector& x, const Vector& y) const override;
  Matrix hess_xy_f(const Vector& x, const Vector& y) const override;
  Matrix hess_yy_f(const Vector& x, const Vector& y) const override;
  Matrix ystar_jacobian(const Vector& x) const override;
  Matrix ystar_curvature(const Vector& x, const Vector& w) const override;

  Vector minimax_grad_x(const Vector& x, const Vector& y) const override { return grad_x_f(x, y); }
  Vector minimax_grad_y(const Vector& x, const Vector& y) const override { return grad_y_f(x, y); }
  Matrix minimax_hess_xx(const Vector& x, const Vector& y) const override { return hess_xx_f(x, y); }
  Matrix minimax_hess_xy(const Vector& x, const Vector& y) const override { return hess_xy_f(x, y); }
  Matrix minimax_hess_yy(const Vector& x, const Vector& y) const override { return hess_yy_f(x, y); }

 private:
  void init();

  Data data_;
  Eigen::LLT<Matrix> c_llt_;
  Matrix schur_;
  SmoothnessConstants constants_;
};

SmoothnessConstants box_constants(const MinimaxQuadratic::Data& data);

/// Random MinimaxQuadratic with spectra drawn from fixed ranges; used by the
/// classification experiments.
std::shared_ptr<const MinimaxQuadratic> make_random_minimax(Index d, Index n, double quartic_coef,
                                                            std::uint64_t seed);

struct PlantedSaddleOptions {
  double mu = 1.0;             // smallest eigenvalue of Q
  double kappa = 2.0;          // condition number of Q
  double quartic_coef = 0.0;   // <= 0 selects |neg_eig| / 4, i.e. minima at distance 1
  double coupling = 0.5;       // spectral norm of B
  double a_norm = 0.5;         // norm of the linear y-term of f
  double box_margin = 1.25;    // box radius as a multiple of the minimizer distance
  double strictness = 4.0;     // epsilon_target = (neg_eig / strictness)^2 / rho_phi_eff
  double rho_floor = kDefaultRhoFloor;
};

/// Quadratic-coupled problem with a strict saddle of Phi at the origin and a
/// mirror pair of strict local minima +-t* e_j along the negative-curvature axis.
struct PlantedSaddleProblem {
  std::shared_ptr<const QuadraticCoupledBilevel> problem;
  Vector x_saddle;
  Vector x_min;                 // minima.front()
  std::vector<Vector> minima;   // all planted local minima
  double neg_eig = 0.0;
  double epsilon_target = 0.0;  // lambda_min(Hess Phi(x_saddle)) <= -sqrt(rho_phi_eff * epsilon_target)
};

/// Throws ConstructionFailed if no valid draw is found within the retry budget.
PlantedSaddleProblem make_planted_saddle(Index d, Index n, double neg_eig, std::uint64_t seed,
                                         const PlantedSaddleOptions& options = {});

/// Finite-sum stochastic problem: component i replaces (Q, B, c, a) of the base
/// problem by zero-mean perturbations, so the component average is the base.
class FiniteSumBilevel {
 public:
  struct Component {
    Matrix Q;
    Matrix B;
    Vector c;
    Vector a;
  };

  FiniteSumBilevel(std::shared_ptr<const QuadraticCoupledBilevel> base, std::vector<Component> components);

  const QuadraticCoupledBilevel& base() const { return *base_; }
  std::shared_ptr<const QuadraticCoupledBilevel> base_ptr() const { return base_; }
  const std::vector<Component>& components() const { return components_; }
  int num_components() const { return static_cast<int>(components_.size()); }
  Index dim_x() const { return base_->dim_x(); }
  Index dim_y() const { return base_->dim_y(); }
  /// Constants valid for every component (and hence every batch average).
  const SmoothnessConstants& constants() const { return constants_; }

  Vector batch_grad_y_G(const Vector& x, const Vector& y, const std::vector<int>& batch) const;
  Vector batch_hvp_yy_G(const Vector& v, const std::vector<int>& batch) const;
  Vector batch_grad_x_F(const Vector& x, const Vector& y, const std::vector<int>& batch) const;
  Vector batch_grad_y_F(const std::vector<int>& batch) const;
  Vector batch_jvp_xy_G(const Vector& v, const std::vector<int>& batch) const;

  /// Deterministic bilevel problem f_{D_F}, g_{D_G} built from batch averages.
  std::shared_ptr<const QuadraticCoupledBilevel> batch_problem(const std::vector<int>& batch_f,
                                                               const std::vector<int>& batch_g) const;

 private:
  std::shared_ptr<const QuadraticCoupledBilevel> base_;
  std::vector<Component> components_;
  SmoothnessConstants constants_;
};

/// Builds `num_components` components whose perturbations sum to zero and are
/// scaled so that every component Hessian stays within [mu/2, 2 ell]. `noise`
/// in [0, 1] is the perturbation size relative to that budget.
std::shared_ptr<const FiniteSumBilevel> make_finite_sum(std::shared_ptr<const QuadraticCoupledBilevel> base,
                                                        int num_components, double noise, std::uint64_t seed);

/// Sample index sets for one outer iteration of the stochastic estimator.
struct BatchPlan {
  std::vector<int> d_f;
  std::vector<int> d_g;
  std::vector<std::vector<int>> d_h;        // d_h[j - 1] is batch B_j, j = 1..Q
  std::vector<std::vector<int>> s_batches;  // one per inner SGD step
};

/// |B_{Q+1-j}| = ceil(B * Q * (1 - eta mu)^(j-1)), j = 1..Q.
std::vector<int> neumann_batch_sizes(int hessian_batch, int depth, double eta, double mu);

/// All index sets drawn uniformly with replacement.
BatchPlan sample_batches(const FiniteSumBilevel& fs, const StocConfig& cfg, Rng& rng);

struct GroundTruth {
  double phi = 0.0;
  Vector grad;
  Matrix hess;
};

GroundTruth ground_truth(const AnalyticOracle& oracle, const Vector& x);
/// Throws InvalidArgument if the problem has no analytic oracle.
GroundTruth ground_truth(const BilevelProblem& problem, const Vector& x);

}  // namespace bilevel
