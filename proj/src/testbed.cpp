#include "bilevel/testbed.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "bilevel/errors.hpp"
#include "bilevel/solvers.hpp"

namespace bilevel {
namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

Vector cube(const Vector& x) { return x.array().cube().matrix(); }

double quartic_sum(const Vector& x) { return x.array().square().square().sum(); }

Matrix quartic_hessian(double coef, const Vector& x) {
  return (12.0 * coef * x.array().square()).matrix().asDiagonal();
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Vector gaussian_vector(Index n, Rng& rng) { return gaussian_matrix(n, 1, rng).col(0); }

Matrix random_orthogonal(Index n, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, n, rng));
  Matrix q = qr.householderQ();
  // Fix column signs so the distribution does not depend on QR conventions.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

// Symmetric matrix with eigenvalues spread over [lo, hi], both endpoints attained.
Matrix random_spectrum_matrix(Index n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector eig(n);
  for (Index i = 0; i < n; ++i) eig[i] = unif(rng);
  eig[0] = lo;
  if (n > 1) eig[n - 1] = hi;
  const Matrix u = random_orthogonal(n, rng);
  Matrix m = u * eig.asDiagonal() * u.transpose();
  return 0.5 * (m + m.transpose());
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Eigen::LLT<Matrix> spd_factor(const Matrix& m, const char* name) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw InvalidArgument(std::string(name) + " must be symmetric positive definite");
  return llt;
}

}  // namespace

// ---------------------------------------------------------------------------
// QuadraticCoupledBilevel

SmoothnessConstants box_constants(const QuadraticCoupledBilevel::Data& data) {
  const Index d = data.B.cols();
  const double r = data.box_radius;
  const double c4 = data.quartic_coef;
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  Eigen::SelfAdjointEigenSolver<Matrix> es(data.Q, Eigen::EigenvaluesOnly);
  const double norm_p = spectral_norm(data.P_upper);
  const double p_lin_norm = data.p_lin.size() ? data.p_lin.norm() : 0.0;

  SmoothnessConstants c;
  c.mu = es.eigenvalues().minCoeff();
  c.ell = std::max({es.eigenvalues().maxCoeff(), spectral_norm(data.B), norm_p + 12.0 * c4 * r * r, c.mu});
  c.rho = 24.0 * c4 * r;
  c.nu = 0.0;
  c.m_bound = std::max(4.0 * c4 * r * r * r * sqrt_d + norm_p * r * sqrt_d + p_lin_norm, data.a.norm());
  c.sigma2 = 0.0;
  return c;
}

QuadraticCoupledBilevel::QuadraticCoupledBilevel(Data data) : data_(std::move(data)) {
  init();
  constants_ = box_constants(data_);
  constants_.validate();
}

QuadraticCoupledBilevel::QuadraticCoupledBilevel(Data data, const SmoothnessConstants& constants)
    : data_(std::move(data)), constants_(constants) {
  init();
  constants_.validate();
}

void QuadraticCoupledBilevel::init() {
  const Index n = data_.B.rows();
  const Index d = data_.B.cols();
  if (n == 0 || d == 0) throw InvalidArgument("QuadraticCoupledBilevel: empty dimensions");
  if (data_.Q.rows() != n || data_.Q.cols() != n) throw InvalidArgument("QuadraticCoupledBilevel: Q must be n x n");
  if (data_.c.size() != n || data_.a.size() != n) throw InvalidArgument("QuadraticCoupledBilevel: c, a must be n-vectors");
  if (data_.P_upper.rows() != d || data_.P_upper.cols() != d) {
    throw InvalidArgument("QuadraticCoupledBilevel: P_upper must be d x d");
  }
  if (data_.p_lin.size() == 0) data_.p_lin = Vector::Zero(d);
  if (data_.p_lin.size() != d) throw InvalidArgument("QuadraticCoupledBilevel: p_lin must be a d-vector");
  if (data_.quartic_coef < 0.0) throw InvalidArgument("QuadraticCoupledBilevel: quartic_coef must be >= 0");
  if (!(data_.box_radius > 0.0)) throw InvalidArgument("QuadraticCoupledBilevel: box_radius must be positive");
  if (!data_.P_upper.isApprox(data_.P_upper.transpose(), 1e-12)) {
    throw InvalidArgument("QuadraticCoupledBilevel: P_upper must be symmetric");
  }
  q_llt_ = spd_factor(data_.Q, "Q");
  coupling_ = data_.B.transpose() * q_llt_.solve(data_.a);
}

double QuadraticCoupledBilevel::f(const Vector& x, const Vector& y) const {
  return data_.quartic_coef * quartic_sum(x) + 0.5 * x.dot(data_.P_upper * x) + data_.p_lin.dot(x) + data_.a.dot(y);
}

double QuadraticCoupledBilevel::g(const Vector& x, const Vector& y) const {
  return 0.5 * y.dot(data_.Q * y) - y.dot(data_.B * x + data_.c);
}

Vector QuadraticCoupledBilevel::grad_x_f(const Vector& x, const Vector&) const {
  return 4.0 * data_.quartic_coef * cube(x) + data_.P_upper * x + data_.p_lin;
}

Vector QuadraticCoupledBilevel::grad_y_f(const Vector&, const Vector&) const { return data_.a; }

Vector QuadraticCoupledBilevel::grad_y_g(const Vector& x, const Vector& y) const {
  return data_.Q * y - data_.B * x - data_.c;
}

Vector QuadraticCoupledBilevel::hvp_yy_g(const Vector&, const Vector&, const Vector& v) const { return data_.Q * v; }

Vector QuadraticCoupledBilevel::jvp_xy_g(const Vector&, const Vector&, const Vector& v) const {
  return -(data_.B.transpose() * v);
}

Vector QuadraticCoupledBilevel::ystar(const Vector& x) const { return q_llt_.solve(data_.B * x + data_.c); }

double QuadraticCoupledBilevel::phi(const Vector& x) const { return f(x, ystar(x)); }

Vector QuadraticCoupledBilevel::grad_phi(const Vector& x) const {
  // p_lin + coupling is grouped first so that a planted cancellation is exact.
  const Vector constant = data_.p_lin + coupling_;
  return 4.0 * data_.quartic_coef * cube(x) + data_.P_upper * x + constant;
}

Matrix QuadraticCoupledBilevel::hess_phi(const Vector& x) const {
  return quartic_hessian(data_.quartic_coef, x) + data_.P_upper;
}

Matrix QuadraticCoupledBilevel::hess_xx_f(const Vector& x, const Vector&) const { return hess_phi(x); }

Matrix QuadraticCoupledBilevel::hess_xy_f(const Vector&, const Vector&) const {
  return Matrix::Zero(dim_x(), dim_y());
}

Matrix QuadraticCoupledBilevel::hess_yy_f(const Vector&, const Vector&) const {
  return Matrix::Zero(dim_y(), dim_y());
}

Matrix QuadraticCoupledBilevel::ystar_jacobian(const Vector&) const {
  // dy*/dx = -G_xy G_yy^{-1} with G_xy = -B^T, G_yy = Q.
  return q_llt_.solve(data_.B).transpose();
}

Matrix QuadraticCoupledBilevel::ystar_curvature(const Vector&, const Vector&) const {
  return Matrix::Zero(dim_x(), dim_x());
}

// ---------------------------------------------------------------------------
// MinimaxQuadratic

SmoothnessConstants box_constants(const MinimaxQuadratic::Data& data) {
  const Index d = data.B.rows();
  const double r = data.box_radius;
  const double c4 = data.quartic_coef;
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  Eigen::SelfAdjointEigenSolver<Matrix> es(data.C, Eigen::EigenvaluesOnly);
  const double norm_a = spectral_norm(data.A_x);
  const double norm_b = spectral_norm(data.B);
  const Matrix response = data.C.llt().solve(data.B.transpose());  // y*(x) = response * x

  SmoothnessConstants c;
  c.mu = es.eigenvalues().minCoeff();
  c.ell = std::max({norm_a + 12.0 * c4 * r * r, norm_b, es.eigenvalues().maxCoeff(), c.mu});
  c.rho = 24.0 * c4 * r;
  c.nu = 0.0;
  c.m_bound = 4.0 * c4 * r * r * r * sqrt_d + norm_a * r * sqrt_d + norm_b * spectral_norm(response) * r * sqrt_d;
  return c;
}

MinimaxQuadratic::MinimaxQuadratic(Data data) : data_(std::move(data)) {
  init();
  constants_ = box_constants(data_);
  constants_.validate();
}

MinimaxQuadratic::MinimaxQuadratic(Data data, const SmoothnessConstants& constants)
    : data_(std::move(data)), constants_(constants) {
  init();
  constants_.validate();
}

void MinimaxQuadratic::init() {
  const Index d = data_.B.rows();
  const Index n = data_.B.cols();
  if (n == 0 || d == 0) throw InvalidArgument("MinimaxQuadratic: empty dimensions");
  if (data_.A_x.rows() != d || data_.A_x.cols() != d) throw InvalidArgument("MinimaxQuadratic: A_x must be d x d");
  if (data_.C.rows() != n || data_.C.cols() != n) throw InvalidArgument("MinimaxQuadratic: C must be n x n");
  if (!data_.A_x.isApprox(data_.A_x.transpose(), 1e-12)) throw InvalidArgument("MinimaxQuadratic: A_x must be symmetric");
  if (data_.quartic_coef < 0.0) throw InvalidArgument("MinimaxQuadratic: quartic_coef must be >= 0");
  if (!(data_.box_radius > 0.0)) throw InvalidArgument("MinimaxQuadratic: box_radius must be positive");
  c_llt_ = spd_factor(data_.C, "C");
  schur_ = symmetrize(data_.A_x + data_.B * c_llt_.solve(data_.B.transpose()));
}

double MinimaxQuadratic::f(const Vector& x, const Vector& y) const {
  return data_.quartic_coef * quartic_sum(x) + 0.5 * x.dot(data_.A_x * x) + x.dot(data_.B * y) -
         0.5 * y.dot(data_.C * y);
}

Vector MinimaxQuadratic::grad_x_f(const Vector& x, const Vector& y) const {
  return 4.0 * data_.quartic_coef * cube(x) + data_.A_x * x + data_.B * y;
}

Vector MinimaxQuadratic::grad_y_f(const Vector& x, const Vector& y) const {
  return data_.B.transpose() * x - data_.C * y;
}

Vector MinimaxQuadratic::grad_y_g(const Vector& x, const Vector& y) const { return -grad_y_f(x, y); }

Vector MinimaxQuadratic::hvp_yy_g(const Vector&, const Vector&, const Vector& v) const { return data_.C * v; }

Vector MinimaxQuadratic::jvp_xy_g(const Vector&, const Vector&, const Vector& v) const { return -(data_.B * v); }

Vector MinimaxQuadratic::ystar(const Vector& x) const { return c_llt_.solve(data_.B.transpose() * x); }

double MinimaxQuadratic::phi(const Vector& x) const {
  return data_.quartic_coef * quartic_sum(x) + 0.5 * x.dot(schur_ * x);
}

Vector MinimaxQuadratic::grad_phi(const Vector& x) const {
  return 4.0 * data_.quartic_coef * cube(x) + schur_ * x;
}

Matrix MinimaxQuadratic::hess_phi(const Vector& x) const { return quartic_hessian(data_.quartic_coef, x) + schur_; }

Matrix MinimaxQuadratic::hess_xx_f(const Vector& x, const Vector&) const {
  return quartic_hessian(data_.quartic_coef, x) + data_.A_x;
}

Matrix MinimaxQuadratic::hess_xy_f(const Vector&, const Vector&) const { return data_.B; }

Matrix MinimaxQuadratic::hess_yy_f(const Vector&, const Vector&) const { return -data_.C; }

Matrix MinimaxQuadratic::ystar_jacobian(const Vector&) const { return c_llt_.solve(data_.B.transpose()).transpose(); }

Matrix MinimaxQuadratic::ystar_curvature(const Vector&, const Vector&) const { return Matrix::Zero(dim_x(), dim_x()); }

std::shared_ptr<const MinimaxQuadratic> make_random_minimax(Index d, Index n, double quartic_coef, std::uint64_t seed) {
  if (d < 1 || n < 1) throw InvalidArgument("make_random_minimax: dimensions must be positive");
  Rng rng(seed);
  MinimaxQuadratic::Data data;
  data.A_x = random_spectrum_matrix(d, -1.5, 1.5, rng);
  data.B = gaussian_matrix(d, n, rng) * (0.7 / std::sqrt(static_cast<double>(std::max(d, n))));
  data.C = random_spectrum_matrix(n, 1.0, 3.0, rng);
  data.quartic_coef = quartic_coef;
  data.box_radius = 2.0;
  return std::make_shared<const MinimaxQuadratic>(std::move(data));
}

// ---------------------------------------------------------------------------
// Planted saddle

PlantedSaddleProblem make_planted_saddle(Index d, Index n, double neg_eig, std::uint64_t seed,
                                         const PlantedSaddleOptions& options) {
  if (d < 2 || n < 1) throw InvalidArgument("make_planted_saddle: need d >= 2 and n >= 1");
  if (!(neg_eig < 0.0)) throw InvalidArgument("make_planted_saddle: neg_eig must be negative");
  if (!(options.kappa >= 1.0) || !(options.mu > 0.0)) throw InvalidArgument("make_planted_saddle: bad Q spectrum");

  const double lam = -neg_eig;
  const double quartic = options.quartic_coef > 0.0 ? options.quartic_coef : lam / 4.0;
  const double t_star = std::sqrt(lam / (4.0 * quartic));

  Rng rng(seed);
  constexpr int kMaxAttempts = 16;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    QuadraticCoupledBilevel::Data data;
    data.Q = random_spectrum_matrix(n, options.mu, options.mu * options.kappa, rng);

    Matrix b = gaussian_matrix(n, d, rng);
    const double b_norm = spectral_norm(b);
    if (!(b_norm > 1e-12)) continue;
    data.B = b * (options.coupling / b_norm);

    data.c = 0.5 * gaussian_vector(n, rng);
    Vector a = gaussian_vector(n, rng);
    if (!(a.norm() > 1e-12)) continue;
    data.a = a * (options.a_norm / a.norm());

    std::uniform_int_distribution<Index> axis_dist(0, d - 1);
    std::uniform_real_distribution<double> pos_dist(lam, 2.0 * lam);
    const Index axis = axis_dist(rng);
    Vector diag(d);
    for (Index i = 0; i < d; ++i) diag[i] = pos_dist(rng);
    diag[axis] = neg_eig;
    data.P_upper = diag.asDiagonal();

    data.quartic_coef = quartic;
    data.box_radius = options.box_margin * t_star;

    // p_lin cancels the lower-level contribution to grad Phi so that the
    // origin is stationary; computed from the same coupling vector the oracle uses.
    data.p_lin = Vector::Zero(d);
    auto provisional = QuadraticCoupledBilevel(data);
    data.p_lin = -provisional.coupling_gradient();

    auto problem = std::make_shared<const QuadraticCoupledBilevel>(std::move(data));

    PlantedSaddleProblem out;
    out.problem = problem;
    out.neg_eig = neg_eig;
    out.x_saddle = Vector::Zero(d);
    Vector plus = Vector::Zero(d);
    plus[axis] = t_star;
    out.minima = {plus, -plus};
    out.x_min = plus;

    const DerivedConstants dc = derive_constants(problem->constants());
    const double rho_eff = effective_rho_phi(dc.rho_phi, options.rho_floor);
    out.epsilon_target = (lam / options.strictness) * (lam / options.strictness) / rho_eff;

    // Witness checks against the analytic oracle.
    const Matrix h_saddle = problem->hess_phi(out.x_saddle);
    const auto pair = min_eigenvalue(h_saddle, 1e-12);
    if (problem->grad_phi(out.x_saddle).norm() > 1e-10) continue;
    if (std::abs(pair.value - neg_eig) > 1e-8) continue;
    bool minima_ok = true;
    for (const Vector& m : out.minima) {
      if (!(problem->phi(m) < problem->phi(out.x_saddle))) minima_ok = false;
      if (problem->grad_phi(m).norm() > 1e-8 * (1.0 + lam)) minima_ok = false;
      if (!(min_eigenvalue(problem->hess_phi(m), 1e-12).value > 0.0)) minima_ok = false;
    }
    if (!minima_ok) continue;
    return out;
  }
  throw ConstructionFailed("make_planted_saddle: no valid draw after retries");
}

// ---------------------------------------------------------------------------
// Finite sums

FiniteSumBilevel::FiniteSumBilevel(std::shared_ptr<const QuadraticCoupledBilevel> base,
                                   std::vector<Component> components)
    : base_(std::move(base)), components_(std::move(components)) {
  if (!base_) throw InvalidArgument("FiniteSumBilevel: null base problem");
  if (components_.empty()) throw InvalidArgument("FiniteSumBilevel: need at least one component");

  const auto& bd = base_->data();
  const Index d = base_->dim_x();
  const double r = bd.box_radius;
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  SmoothnessConstants c = base_->constants();
  double mu = std::numeric_limits<double>::infinity();
  double ell = c.ell;
  double m_bound = c.m_bound;
  double sigma = 0.0;
  const double y_radius = (spectral_norm(bd.B) * r * sqrt_d + bd.c.norm()) / c.mu;
  for (const auto& comp : components_) {
    if (comp.Q.rows() != base_->dim_y() || comp.B.rows() != base_->dim_y() || comp.B.cols() != d ||
        comp.c.size() != base_->dim_y() || comp.a.size() != base_->dim_y()) {
      throw InvalidArgument("FiniteSumBilevel: component dimension mismatch");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(comp.Q, Eigen::EigenvaluesOnly);
    mu = std::min(mu, es.eigenvalues().minCoeff());
    ell = std::max({ell, es.eigenvalues().maxCoeff(), spectral_norm(comp.B)});
    m_bound = std::max(m_bound, comp.a.norm());
    const double dev = spectral_norm(comp.Q - bd.Q) * y_radius + spectral_norm(comp.B - bd.B) * r * sqrt_d +
                       (comp.c - bd.c).norm();
    sigma = std::max(sigma, dev);
  }
  if (!(mu > 0.0)) throw InvalidArgument("FiniteSumBilevel: component lower level is not strongly convex");
  c.mu = std::min(mu, c.mu);
  c.ell = std::max(ell, c.mu);
  c.m_bound = m_bound;
  c.sigma2 = sigma * sigma;
  c.validate();
  constants_ = c;
}

Vector FiniteSumBilevel::batch_grad_y_G(const Vector& x, const Vector& y, const std::vector<int>& batch) const {
  Vector acc = Vector::Zero(dim_y());
  for (int i : batch) {
    const auto& comp = components_.at(static_cast<std::size_t>(i));
    acc += comp.Q * y - comp.B * x - comp.c;
  }
  return acc / static_cast<double>(batch.size());
}

Vector FiniteSumBilevel::batch_hvp_yy_G(const Vector& v, const std::vector<int>& batch) const {
  Vector acc = Vector::Zero(dim_y());
  for (int i : batch) acc += components_.at(static_cast<std::size_t>(i)).Q * v;
  return acc / static_cast<double>(batch.size());
}

Vector FiniteSumBilevel::batch_grad_x_F(const Vector& x, const Vector& y, const std::vector<int>&) const {
  // The x-part of F does not depend on the sample.
  return base_->grad_x_f(x, y);
}

Vector FiniteSumBilevel::batch_grad_y_F(const std::vector<int>& batch) const {
  Vector acc = Vector::Zero(dim_y());
  for (int i : batch) acc += components_.at(static_cast<std::size_t>(i)).a;
  return acc / static_cast<double>(batch.size());
}

Vector FiniteSumBilevel::batch_jvp_xy_G(const Vector& v, const std::vector<int>& batch) const {
  Vector acc = Vector::Zero(dim_x());
  for (int i : batch) acc -= components_.at(static_cast<std::size_t>(i)).B.transpose() * v;
  return acc / static_cast<double>(batch.size());
}

std::shared_ptr<const QuadraticCoupledBilevel> FiniteSumBilevel::batch_problem(const std::vector<int>& batch_f,
                                                                               const std::vector<int>& batch_g) const {
  if (batch_f.empty() || batch_g.empty()) throw InvalidArgument("batch_problem: empty batch");
  QuadraticCoupledBilevel::Data data = base_->data();
  data.Q.setZero();
  data.B.setZero();
  data.c.setZero();
  data.a.setZero();
  for (int i : batch_g) {
    const auto& comp = components_.at(static_cast<std::size_t>(i));
    data.Q += comp.Q;
    data.B += comp.B;
    data.c += comp.c;
  }
  const double inv_g = 1.0 / static_cast<double>(batch_g.size());
  data.Q = symmetrize(data.Q * inv_g);
  data.B *= inv_g;
  data.c *= inv_g;
  data.a = batch_grad_y_F(batch_f);
  return std::make_shared<const QuadraticCoupledBilevel>(std::move(data), constants_);
}

std::shared_ptr<const FiniteSumBilevel> make_finite_sum(std::shared_ptr<const QuadraticCoupledBilevel> base,
                                                        int num_components, double noise, std::uint64_t seed) {
  if (!base) throw InvalidArgument("make_finite_sum: null base");
  if (num_components < 1) throw InvalidArgument("make_finite_sum: need at least one component");
  if (!(noise >= 0.0 && noise <= 1.0)) throw InvalidArgument("make_finite_sum: noise must lie in [0, 1]");

  const auto& bd = base->data();
  const Index n = base->dim_y();
  const Index d = base->dim_x();
  const double mu = base->constants().mu;
  const std::size_t count = static_cast<std::size_t>(num_components);

  Rng rng(seed);
  std::vector<Matrix> dq(count), db(count);
  std::vector<Vector> dc(count), da(count);
  for (std::size_t i = 0; i < count; ++i) {
    dq[i] = symmetrize(gaussian_matrix(n, n, rng));
    db[i] = gaussian_matrix(n, d, rng);
    dc[i] = gaussian_vector(n, rng);
    da[i] = gaussian_vector(n, rng);
  }

  // Center so the perturbations sum to zero, then scale to the budget.
  auto center_and_scale = [count](auto& items, double budget, auto norm_of) {
    auto mean = items[0];
    for (std::size_t i = 1; i < count; ++i) mean += items[i];
    mean /= static_cast<double>(count);
    double largest = 0.0;
    for (auto& item : items) {
      item -= mean;
      largest = std::max(largest, norm_of(item));
    }
    const double scale = largest > 0.0 ? budget / largest : 0.0;
    for (auto& item : items) item *= scale;
  };
  const double half_mu = 0.5 * mu * noise;
  center_and_scale(dq, half_mu, [](const Matrix& m) { return spectral_norm(m); });
  center_and_scale(db, half_mu, [](const Matrix& m) { return spectral_norm(m); });
  center_and_scale(dc, half_mu, [](const Vector& v) { return v.norm(); });
  center_and_scale(da, 0.5 * noise * std::max(bd.a.norm(), mu), [](const Vector& v) { return v.norm(); });

  std::vector<FiniteSumBilevel::Component> components(count);
  for (std::size_t i = 0; i < count; ++i) {
    components[i].Q = bd.Q + dq[i];
    components[i].B = bd.B + db[i];
    components[i].c = bd.c + dc[i];
    components[i].a = bd.a + da[i];
  }
  return std::make_shared<const FiniteSumBilevel>(std::move(base), std::move(components));
}

// ---------------------------------------------------------------------------
// Batches

void StocConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !(neumann_eta > 0.0) || !(c_order > 0.0)) {
    throw InvalidArgument("StocConfig: step sizes and c_order must be positive");
  }
  if (inner_steps < 0 || neumann_depth < 0) throw InvalidArgument("StocConfig: depths must be nonnegative");
  if (inner_batch < 1 || hessian_batch < 1 || batch_f < 1 || batch_g < 1) {
    throw InvalidArgument("StocConfig: batch sizes must be >= 1");
  }
}

std::vector<int> neumann_batch_sizes(int hessian_batch, int depth, double eta, double mu) {
  if (depth < 0 || hessian_batch < 1) throw InvalidArgument("neumann_batch_sizes: bad schedule");
  const double ratio = 1.0 - eta * mu;
  if (!(ratio >= 0.0 && ratio < 1.0)) throw InvalidArgument("neumann_batch_sizes: need 0 < eta mu <= 1");
  std::vector<int> sizes(static_cast<std::size_t>(depth));
  for (int j = 1; j <= depth; ++j) {
    const double raw = static_cast<double>(hessian_batch) * depth * std::pow(ratio, j - 1);
    // Shave a few ulps so that exact products are not bumped up by rounding.
    const int size = std::max(1, static_cast<int>(std::ceil(raw * (1.0 - 4.0 * DBL_EPSILON))));
    sizes[static_cast<std::size_t>(depth - j)] = size;  // batch index Q + 1 - j
  }
  return sizes;
}

BatchPlan sample_batches(const FiniteSumBilevel& fs, const StocConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_int_distribution<int> pick(0, fs.num_components() - 1);
  auto draw = [&](int count) {
    std::vector<int> batch(static_cast<std::size_t>(count));
    for (int& idx : batch) idx = pick(rng);
    return batch;
  };

  BatchPlan plan;
  plan.d_f = draw(cfg.batch_f);
  plan.d_g = draw(cfg.batch_g);
  for (int size : neumann_batch_sizes(cfg.hessian_batch, cfg.neumann_depth, cfg.neumann_eta, fs.constants().mu)) {
    plan.d_h.push_back(draw(size));
  }
  for (int t = 0; t < cfg.inner_steps; ++t) plan.s_batches.push_back(draw(cfg.inner_batch));
  return plan;
}

GroundTruth ground_truth(const AnalyticOracle& oracle, const Vector& x) {
  return GroundTruth{oracle.phi(x), oracle.grad_phi(x), oracle.hess_phi(x)};
}

GroundTruth ground_truth(const BilevelProblem& problem, const Vector& x) {
  const AnalyticOracle* oracle = problem.analytic();
  if (!oracle) throw InvalidArgument("ground_truth: problem has no analytic oracle");
  return ground_truth(*oracle, x);
}

}  // namespace bilevel
