#include "bilevel/diagnostics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "bilevel/errors.hpp"
#include "bilevel/escape.hpp"
#include "bilevel/reference.hpp"

namespace bilevel {

const char* to_string(PointClass::Tag tag) {
  switch (tag) {
    case PointClass::Tag::ApproxLocalMin:
      return "ApproxLocalMin";
    case PointClass::Tag::StrictSaddle:
      return "StrictSaddle";
    case PointClass::Tag::NonStationary:
      return "NonStationary";
  }
  return "unknown";
}

PointClass classify_point(const BilevelProblem& p, const Vector& x, double epsilon, double rho_phi_eff) {
  if (!(epsilon > 0.0) || !(rho_phi_eff > 0.0)) {
    throw InvalidArgument("classify_point: epsilon and rho_phi_eff must be positive");
  }
  Vector grad;
  Matrix hess;
  if (const AnalyticOracle* oracle = p.analytic()) {
    grad = oracle->grad_phi(x);
    hess = oracle->hess_phi(x);
  } else {
    constexpr double kTol = 1e-10;
    grad = reference_hypergradient(p, x, kTol);
    hess = reference_phi_hessian(p, x, ReferenceOptions{}.fd_step, HessianPath::FiniteDifference, kTol);
  }
  const Matrix sym = 0.5 * (hess + hess.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NonConvergence("classify_point: eigensolver failed", 0.0);

  PointClass out;
  out.grad_norm = grad.norm();
  out.lambda_min = es.eigenvalues()[0];
  out.epsilon = epsilon;
  out.curvature_threshold = -std::sqrt(rho_phi_eff * epsilon);
  if (out.grad_norm > epsilon) {
    out.tag = PointClass::Tag::NonStationary;
  } else if (out.lambda_min >= out.curvature_threshold) {
    out.tag = PointClass::Tag::ApproxLocalMin;
  } else {
    out.tag = PointClass::Tag::StrictSaddle;
  }
  return out;
}

namespace {

struct Spectrum {
  double min = 0.0;
  double max = 0.0;
  double min_abs = 0.0;
  double margin = 0.0;
};

Spectrum spectrum(const Matrix& m, double rel_tol) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double norm = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
  return Spectrum{ev[0], ev[ev.size() - 1], ev.cwiseAbs().minCoeff(), rel_tol * (1.0 + norm)};
}

}  // namespace

MinimaxClass classify_minimax_point(const MinimaxOracle& f, const Vector& x, const Vector& y,
                                    const MinimaxTolerances& tol) {
  const Matrix hxx = f.minimax_hess_xx(x, y);
  const Matrix hxy = f.minimax_hess_xy(x, y);
  const Matrix hyy = f.minimax_hess_yy(x, y);

  const Spectrum syy = spectrum(hyy, tol.definiteness);
  if (syy.min_abs <= syy.margin) {
    throw SingularSystem("classify_minimax_point: yy block is numerically singular");
  }

  MinimaxClass out;
  const double grad_norm =
      std::sqrt(f.minimax_grad_x(x, y).squaredNorm() + f.minimax_grad_y(x, y).squaredNorm());
  out.is_stationary = grad_norm <= tol.stationarity * (1.0 + tol.grad_scale);
  out.yy_negdef = syy.max < -syy.margin;

  const Spectrum sxx = spectrum(hxx, tol.definiteness);
  out.xx_posdef = sxx.min > sxx.margin;

  const Matrix schur = hxx - hxy * hyy.fullPivLu().solve(hxy.transpose());
  const Spectrum ss = spectrum(schur, tol.definiteness);
  out.schur_posdef = ss.min > ss.margin;

  out.strict_local_nash = out.is_stationary && out.yy_negdef && out.xx_posdef;
  out.strict_local_minimax = out.is_stationary && out.yy_negdef && out.schur_posdef;
  return out;
}

bool escape_event(const RunTrace& trace, const PerturbConfig& cfg, const std::vector<double>& phi_series) {
  if (phi_series.size() != trace.records.size()) {
    throw MisalignedSeries("escape_event: " + std::to_string(phi_series.size()) + " values for " +
                           std::to_string(trace.records.size()) + " records");
  }
  const std::size_t window = static_cast<std::size_t>(cfg.t_script);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (!trace.records[i].perturbed) continue;
    const std::size_t j = i + window;
    if (j >= phi_series.size()) continue;
    if (trace.records[j].k - trace.records[i].k != cfg.t_script) {
      throw MisalignedSeries("escape_event: trace iterations are not contiguous");
    }
    if (phi_series[j] - phi_series[i] <= -0.5 * cfg.f_script) return true;
  }
  return false;
}

RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys, FitSpace space) {
  if (xs.size() != ys.size()) throw MisalignedSeries("rate_fit: xs and ys differ in length");
  if (xs.size() < 3) throw DegenerateFit("rate_fit: need at least 3 points, got " + std::to_string(xs.size()));

  const std::size_t n = xs.size();
  Eigen::VectorXd u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ys[i] > 0.0)) throw InvalidArgument("rate_fit: y values must be positive");
    if (space == FitSpace::Loglog && !(xs[i] > 0.0)) throw InvalidArgument("rate_fit: x values must be positive");
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    u[ii] = space == FitSpace::Loglog ? std::log(xs[i]) : xs[i];
    v[ii] = std::log(ys[i]);
  }
  const double mu_u = u.mean(), mu_v = v.mean();
  const Eigen::VectorXd du = u.array() - mu_u;
  const Eigen::VectorXd dv = v.array() - mu_v;
  const double sxx = du.squaredNorm();
  if (!(sxx > 1e-300)) throw DegenerateFit("rate_fit: x values have zero spread");

  RateFit fit;
  fit.slope = du.dot(dv) / sxx;
  fit.intercept = mu_v - fit.slope * mu_u;
  const double syy = dv.squaredNorm();
  const double sse = (dv - fit.slope * du).squaredNorm();
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace bilevel
