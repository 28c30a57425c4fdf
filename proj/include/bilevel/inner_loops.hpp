#pragma once

#include <vector>

#include "bilevel/problem.hpp"
#include "bilevel/random.hpp"
#include "bilevel/testbed.hpp"

namespace bilevel {

/// D steps of y <- y - tau * grad_y g(x, y) at fixed x. D = 0 returns y0.
/// Throws NumericalBlowup on a non-finite iterate.
Vector inner_gd(const BilevelProblem& p, const Vector& x, const Vector& y0, double tau, int steps);

/// D steps of minibatch SGD on the lower level, each with a fresh batch of S
/// indices drawn with replacement.
Vector inner_sgd(const FiniteSumBilevel& fs, const Vector& x, const Vector& y0, double alpha, int steps,
                 int batch_size, Rng& rng);

/// Same recursion with caller-provided batches, one per step.
Vector inner_sgd(const FiniteSumBilevel& fs, const Vector& x, const Vector& y0, double alpha,
                 const std::vector<std::vector<int>>& batches);

}  // namespace bilevel
