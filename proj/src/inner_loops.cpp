#include "bilevel/inner_loops.hpp"

#include "bilevel/errors.hpp"

namespace bilevel {

Vector inner_gd(const BilevelProblem& p, const Vector& x, const Vector& y0, double tau, int steps) {
  if (!(tau > 0.0)) throw InvalidArgument("inner_gd: tau must be positive");
  if (steps < 0) throw InvalidArgument("inner_gd: negative step count");
  Vector y = y0;
  for (int t = 0; t < steps; ++t) {
    y -= tau * p.grad_y_g(x, y);
    if (!y.allFinite()) throw NumericalBlowup("inner_gd: non-finite iterate at step " + std::to_string(t + 1));
  }
  return y;
}

Vector inner_sgd(const FiniteSumBilevel& fs, const Vector& x, const Vector& y0, double alpha, int steps,
                 int batch_size, Rng& rng) {
  if (batch_size < 1) throw InvalidArgument("inner_sgd: batch size must be >= 1");
  if (steps < 0) throw InvalidArgument("inner_sgd: negative step count");
  std::uniform_int_distribution<int> pick(0, fs.num_components() - 1);
  std::vector<std::vector<int>> batches(static_cast<std::size_t>(steps));
  for (auto& batch : batches) {
    batch.resize(static_cast<std::size_t>(batch_size));
    for (int& idx : batch) idx = pick(rng);
  }
  return inner_sgd(fs, x, y0, alpha, batches);
}

Vector inner_sgd(const FiniteSumBilevel& fs, const Vector& x, const Vector& y0, double alpha,
                 const std::vector<std::vector<int>>& batches) {
  if (!(alpha > 0.0)) throw InvalidArgument("inner_sgd: alpha must be positive");
  Vector y = y0;
  int t = 0;
  for (const auto& batch : batches) {
    if (batch.empty()) throw InvalidArgument("inner_sgd: empty batch");
    y -= alpha * fs.batch_grad_y_G(x, y, batch);
    ++t;
    if (!y.allFinite()) throw NumericalBlowup("inner_sgd: non-finite iterate at step " + std::to_string(t));
  }
  return y;
}

}  // namespace bilevel
