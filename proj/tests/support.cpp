#include "support.hpp"

#include <random>

#include <Eigen/QR>

#include "bilevel/random.hpp"

namespace bilevel::testing {

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Matrix spd_from(Index n, double lo, double hi, Rng& rng) {
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian(n, n, rng)).householderQ();
  Vector spectrum(n);
  for (Index i = 0; i < n; ++i) spectrum[i] = n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1);
  return q * spectrum.asDiagonal() * q.transpose();
}

}  // namespace

Matrix random_spd(Index n, double lo, double hi, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return spd_from(n, lo, hi, rng);
}

Vector random_vector(Index n, std::uint64_t seed, double scale) {
  Rng rng = make_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return gaussian(n, 1, rng).col(0) * scale;
}

std::shared_ptr<const QuadraticCoupledBilevel> random_coupled(Index d, Index n, std::uint64_t seed, double kappa,
                                                               double quartic) {
  Rng rng = make_rng(seed);
  QuadraticCoupledBilevel::Data data;
  data.Q = spd_from(n, 1.0, kappa, rng);
  data.B = gaussian(n, d, rng) * (0.5 / std::sqrt(double(std::max(n, d))));
  data.c = gaussian(n, 1, rng).col(0) * 0.3;
  const Matrix s = gaussian(d, d, rng);
  data.P_upper = 0.5 * (s + s.transpose()) / std::sqrt(double(d));
  data.quartic_coef = quartic;
  data.a = gaussian(n, 1, rng).col(0) * 0.5;
  data.p_lin = gaussian(d, 1, rng).col(0) * 0.2;
  data.box_radius = 2.0;
  return std::make_shared<const QuadraticCoupledBilevel>(std::move(data));
}

}  // namespace bilevel::testing
