#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "bilevel/errors.hpp"

namespace bilevel {

/// Every randomized routine takes an exclusively owned stream of this type.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform sample from the solid ball of the given radius: Gaussian direction
/// scaled by radius * U^(1/dim).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_uniform_ball(Eigen::Index dim, Scalar radius, Rng& rng) {
  using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (radius < Scalar(0)) throw InvalidArgument("ball radius must be nonnegative");
  if (dim <= 0) return VectorX();

  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  std::uniform_real_distribution<Scalar> uniform(Scalar(0), Scalar(1));

  VectorX direction(dim);
  Scalar norm(0);
  // A zero Gaussian draw has probability zero but would divide by zero.
  do {
    for (Eigen::Index i = 0; i < dim; ++i) direction[i] = normal(rng);
    norm = direction.norm();
  } while (norm == Scalar(0));

  const Scalar u = uniform(rng);
  const Scalar scale = radius * std::pow(u, Scalar(1) / static_cast<Scalar>(dim)) / norm;
  VectorX out = direction * scale;
  // Rounding can push a sample a few ulps outside the ball.
  const Scalar out_norm = out.norm();
  if (out_norm > radius && out_norm > Scalar(0)) out *= radius / out_norm;
  return out;
}

/// +1 or -1 with probability 1/2 each.
inline int sample_rademacher(Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  return coin(rng) ? 1 : -1;
}

}  // namespace bilevel
