// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bilevel/diagnostics.hpp"
#include "bilevel/errors.hpp"
#include "bilevel/escape.hpp"
#include "bilevel/hypergrad.hpp"
#include "bilevel/inner_loops.hpp"
#include "bilevel/solvers.hpp"
#include "bilevel/testbed.hpp"
#include "support.hpp"

using namespace bilevel;
using bilevel::testing::random_coupled;
using bilevel::testing::random_spd;
using bilevel::testing::random_vector;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

PlantedSaddleOptions gentle(double kappa = 2.0) {
  PlantedSaddleOptions o;
  o.kappa = kappa;
  o.coupling = 0.3;
  o.a_norm = 0.3;
  return o;
}

Vector exact_v(const QuadraticCoupledBilevel& p, const Vector& x) {
  return p.data().Q.llt().solve(p.grad_y_f(x, p.ystar(x)));
}

double nearest(const std::vector<Vector>& points, const Vector& x) {
  double best = INFINITY;
  for (const Vector& m : points) best = std::min(best, (x - m).norm());
  return best;
}

// ---------------------------------------------------------------------------

Outcome hypergradient_exactness() {
  const std::vector<std::pair<Index, Index>> dims{{2, 3}, {5, 5}, {10, 8}, {15, 12}, {20, 20}};
  const std::vector<double> kappas{2.0, 3.0, 4.0, 5.0, 3.0};
  double worst = 0.0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    auto p = random_coupled(dims[i].first, dims[i].second, 100 + i, kappas[i]);
    for (int t = 0; t < 20; ++t) {
      const Vector x = random_vector(dims[i].first, 1000 * i + t);
      WarmStartState st = WarmStartState::zeros(*p);
      const Vector g = aid_estimate(*p, x, st, 1.0 / p->constants().ell, 200, 200).grad;
      const Vector exact = p->grad_phi(x);
      worst = std::max(worst, (g - exact).norm() / exact.norm());
    }
  }
  return {worst <= 1e-8, "max relative error " + fmt(worst) + " (limit 1e-8)"};
}

Outcome aid_error_budget() {
  double worst_ratio = 0.0;
  long iterations = 0;
  for (double eps : {1e-2, 1e-3}) {
    for (std::uint64_t s = 0; s < 4; ++s) {
      const double kappa = s % 2 ? 4.0 : 2.0;
      const Index d = 3 + static_cast<Index>(s);
      const PlantedSaddleProblem ps = make_planted_saddle(d, d, -0.15, 50 + s, gentle(kappa));
      const auto& p = *ps.problem;
      const PerturbConfig cfg = theory_params(p.constants(), eps, 2.0, 0.1, ParamMode::Alg1);
      RunOptions opts;
      opts.observer = [&](const StepInfo& info) {
        const double err = (*info.grad_est - p.grad_phi(*info.x_k)).norm();
        worst_ratio = std::max(worst_ratio, err / (eps / 5.0));
        ++iterations;
      };
      Rng rng = make_rng(s);
      const Vector x0 = ps.x_saddle + random_vector(d, s, 0.3);
      const RunTrace tr = perturbed_descent(p, x0, Vector::Zero(d), Vector::Zero(d), cfg, HypergradOption::AID, 200,
                                            rng, opts);
      if (tr.failure) return {false, "run failed: " + *tr.failure};
    }
  }
  return {worst_ratio <= 1.0, "max error / (eps/5) = " + fmt(worst_ratio) + " over " + std::to_string(iterations) +
                                  " iterations"};
}

Outcome contraction_rates() {
  // Inner GD on quadratic lower levels.
  std::string gd_detail;
  bool gd_ok = true;
  for (double kappa : {4.0, 10.0, 30.0}) {
    QuadraticCoupledBilevel::Data data;
    data.Q = random_spd(8, 1.0, kappa, static_cast<std::uint64_t>(kappa));
    data.B = Matrix::Zero(8, 1);
    data.c = random_vector(8, 3);
    data.P_upper = Matrix::Identity(1, 1);
    data.a = Vector::Zero(8);
    const QuadraticCoupledBilevel p(data);
    const Vector x = Vector::Zero(1);
    const Vector ystar = p.ystar(x);
    const double tau = 1.0 / kappa;  // Q has spectrum [1, kappa], so ell = kappa
    std::vector<double> steps, errors;
    Vector y = random_vector(8, 4);
    // Fit the tail so the slowest mode dominates.
    for (int t = 0; t <= 120; ++t) {
      if (t >= 40) {
        steps.push_back(t);
        errors.push_back((y - ystar).norm());
      }
      y = inner_gd(p, x, y, tau, 1);
    }
    const double slope = rate_fit(steps, errors, FitSpace::Semilog).slope;
    const double target = 0.5 * std::log(1.0 - 1.0 / kappa);
    const double rel = std::abs(slope - target) / std::abs(target);
    gd_ok = gd_ok && rel <= 0.05;
    gd_detail += " k=" + fmt(kappa) + ":" + fmt(slope) + "/" + fmt(target);
  }

  // CG against its Chebyshev envelope.
  bool cg_ok = true;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double kappa = 2.0 + 98.0 * double(s) / 19.0;
    const Matrix h = random_spd(25, 1.0, kappa, 500 + s);
    const Vector b = random_vector(25, s), v0 = random_vector(25, 40 + s);
    const auto op = [&](const Vector& v) -> Vector { return h * v; };
    const Vector exact = h.llt().solve(b);
    const double q = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
    for (int n = 0; n <= 25; ++n) {
      const double err = (cg_solve<double>(op, b, v0, n).solution - exact).norm();
      const double env = 2.0 * std::sqrt(kappa) * std::pow(q, n) * (v0 - exact).norm();
      if (err > env + 1e-12) cg_ok = false;
      if (env > 1e-10) worst = std::max(worst, err / env);
    }
  }
  return {gd_ok && cg_ok, "GD slope measured/target" + gd_detail + " (within 5%: " + (gd_ok ? "yes" : "no") +
                              "); CG max error/envelope " + fmt(worst) + (cg_ok ? "" : " VIOLATED")};
}

Outcome neumann_correctness() {
  bool bound_ok = true, solve_ok = true;
  double worst_solve = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto base = random_coupled(3, 6, 700 + s, 2.0 + double(s % 4));
    auto fs = make_finite_sum(base, 8, 0.7, s);
    const std::vector<int> batch{static_cast<int>(s % 8), static_cast<int>((s + 3) % 8)};
    const auto apply = [&](int, const Vector& v) -> Vector { return fs->batch_hvp_yy_G(v, batch); };
    Matrix h(6, 6);
    for (Index i = 0; i < 6; ++i) h.col(i) = fs->batch_hvp_yy_G(Vector::Unit(6, i), batch);
    const double mu = fs->constants().mu, eta = 1.0 / fs->constants().ell;
    const Vector v0 = random_vector(6, s).normalized();
    const Vector exact = h.llt().solve(v0);
    for (int q : {0, 1, 5, 20, 60}) {
      const double err = (neumann_inverse_hvp<double>(apply, v0, eta, q) - exact).norm();
      if (err > std::pow(1.0 - eta * mu, q + 1) / mu * v0.norm() * (1.0 + 1e-12)) bound_ok = false;
    }
    const int q = static_cast<int>(std::ceil(std::log(1e-6 * mu) / std::log(1.0 - eta * mu) - 1.0));
    const double err = (neumann_inverse_hvp<double>(apply, v0, eta, q) - exact).norm();
    worst_solve = std::max(worst_solve, err);
    if (err > 1e-5) solve_ok = false;
  }
  return {bound_ok && solve_ok, std::string("remainder bound ") + (bound_ok ? "held" : "VIOLATED") +
                                    "; max deviation from dense solve " + fmt(worst_solve) + " (limit 1e-5)"};
}

struct EscapeSetup {
  PlantedSaddleProblem ps;
  PerturbConfig cfg;
};

EscapeSetup escape_setup(std::uint64_t seed, double iota) {
  const Index d = 2 + static_cast<Index>(seed % 9);
  EscapeSetup s{make_planted_saddle(d, d, -0.15, seed, gentle()), {}};
  s.cfg = theory_params(s.ps.problem->constants(), s.ps.epsilon_target, iota, 0.1, ParamMode::Alg1,
                        TheoryOptions{kDefaultRhoFloor, 1.0, d});
  return s;
}

constexpr double kEscapeIota = 5.0;

Outcome saddle_escape() {
  int escaped = 0, control_moved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EscapeSetup s = escape_setup(seed, kEscapeIota);
    const auto& p = *s.ps.problem;
    const Vector& x0 = s.ps.x_saddle;
    const long k_max = 2 * s.cfg.t_script + 3;

    Rng rng = make_rng(seed);
    const RunTrace tr =
        perturbed_descent(p, x0, p.ystar(x0), exact_v(p, x0), s.cfg, HypergradOption::AID, k_max, rng);
    std::vector<double> phis;
    for (const auto& r : tr.records) phis.push_back(*r.phi);
    if (!tr.failure && !tr.perturbation_iterations.empty() && escape_event(tr, s.cfg, phis)) ++escaped;

    PerturbConfig control = s.cfg;
    control.r = 0.0;
    Rng rng2 = make_rng(seed);
    const RunTrace ct = perturbed_descent(p, x0, p.ystar(x0), exact_v(p, x0), control, HypergradOption::Exact, k_max,
                                          rng2);
    if (ct.failure || ct.x_final != x0) ++control_moved;
  }
  return {escaped >= 90 && control_moved == 0, "escaped in " + std::to_string(escaped) + "/100 seeds (need 90), iota " +
                                                   fmt(kEscapeIota) + "; control moved in " +
                                                   std::to_string(control_moved) + "/100"};
}

constexpr double kIneonIota = 20.0;

Outcome ineon_curvature() {
  int good = 0, found = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index d = 2 + static_cast<Index>(seed % 9);
    const PlantedSaddleProblem ps = make_planted_saddle(d, d, -0.15, seed, gentle());
    const auto& p = *ps.problem;
    const SmoothnessConstants& c = p.constants();
    const double eps = ps.epsilon_target;
    PerturbConfig cfg = theory_params(c, eps, kIneonIota, 0.1, ParamMode::Ineon);
    const Vector& x = ps.x_saddle;
    const double delta_hat = p.ystar(x).norm() + exact_v(p, x).norm();
    const AidDepths dd = aid_depths(c, aid_gamma1(c, cfg.eta, delta_hat), eps, kIneonIota, DepthMode::Ineon);
    cfg.d_inner = dd.inner_steps;
    cfg.n_cg = dd.cg_steps;

    const Matrix h = p.hess_phi(x);
    const double lambda_min = Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues()[0];
    if (lambda_min > -std::sqrt(cfg.rho_phi_eff * eps)) return {false, "planted saddle is not strict enough"};

    AidOracle oracle(p, Vector::Zero(d), Vector::Zero(d), cfg.tau, cfg.d_inner, cfg.n_cg);
    Rng rng = make_rng(seed);
    const IneonResult res = ineon([&](const Vector& z) { return oracle.grad(z); },
                                  [&](const Vector& z) { return oracle.phi(z); }, x, cfg, rng);
    if (!res.found) continue;
    ++found;
    const double rq = res.direction.dot(h * res.direction);
    if (rq <= -std::sqrt(cfg.rho_phi_eff * eps) / (40.0 * kIneonIota)) ++good;
  }

  int zero = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index d = 2 + static_cast<Index>(seed % 5), n = 2 + static_cast<Index>(seed % 3);
    QuadraticCoupledBilevel::Data data;
    data.Q = random_spd(n, 1.0, 2.0, 900 + seed);
    data.B = random_spd(std::max(d, n), 0.1, 0.3, 950 + seed).topLeftCorner(n, d);
    data.c = random_vector(n, seed, 0.3);
    data.P_upper = random_spd(d, 0.5, 1.0, 990 + seed);
    data.a = random_vector(n, seed + 1, 0.3);
    const QuadraticCoupledBilevel p(data);
    const SmoothnessConstants& c = p.constants();
    const double eps = 1e-1;
    PerturbConfig cfg = theory_params(c, eps, kIneonIota, 0.1, ParamMode::Ineon);
    const Vector x = random_vector(d, seed + 2);
    const double delta_hat = p.ystar(x).norm() + exact_v(p, x).norm();
    const AidDepths dd = aid_depths(c, aid_gamma1(c, cfg.eta, delta_hat), eps, kIneonIota, DepthMode::Ineon);
    cfg.d_inner = dd.inner_steps;
    cfg.n_cg = dd.cg_steps;
    AidOracle oracle(p, Vector::Zero(n), Vector::Zero(n), cfg.tau, cfg.d_inner, cfg.n_cg);
    Rng rng = make_rng(seed);
    const IneonResult res = ineon([&](const Vector& z) { return oracle.grad(z); },
                                  [&](const Vector& z) { return oracle.phi(z); }, x, cfg, rng);
    if (!res.found) ++zero;
  }
  return {good >= 90 && zero == 100, "curvature bound met in " + std::to_string(good) + "/100 seeds (found " +
                                         std::to_string(found) + ", need 90), iota " + fmt(kIneonIota) +
                                         "; convex zero returns " + std::to_string(zero) + "/100"};
}

Outcome descent_inequality() {
  long checked = 0, violations = 0;
  double worst = -INFINITY;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EscapeSetup s = escape_setup(seed, kEscapeIota);
    const auto& p = *s.ps.problem;
    const double eta = s.cfg.eta;
    RunOptions opts;
    opts.observer = [&](const StepInfo& info) {
      const Vector& g = *info.grad_est;
      const double lhs = p.phi(*info.x_next) - p.phi(*info.x_from);
      const double rhs = -eta / 4.0 * g.squaredNorm() + eta * (p.grad_phi(*info.x_from) - g).squaredNorm();
      worst = std::max(worst, lhs - rhs);
      ++checked;
      if (lhs > rhs + 1e-10) ++violations;
    };
    Rng rng = make_rng(seed);
    const Index d = p.dim_x();
    const RunTrace tr = perturbed_descent(p, s.ps.x_saddle, Vector::Zero(d), Vector::Zero(d), s.cfg,
                                          HypergradOption::AID, 2 * s.cfg.t_script + 3, rng, opts);
    if (tr.failure) return {false, "run failed: " + *tr.failure};
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(checked) +
                               " steps; max (lhs - rhs) " + fmt(worst) + " (slack 1e-10)"};
}

// Newton iteration on grad Phi = 0 for the minimax testbed.
std::optional<Vector> newton_stationary(const MinimaxQuadratic& p, Vector x) {
  for (int it = 0; it < 200; ++it) {
    const Vector g = p.grad_phi(x);
    if (g.norm() <= 1e-13 * (1.0 + x.squaredNorm() * x.norm())) return x;
    const Eigen::FullPivLU<Matrix> lu(p.hess_phi(x));
    if (!lu.isInvertible()) return std::nullopt;
    x -= lu.solve(g);
    if (!x.allFinite() || x.norm() > 1e6) return std::nullopt;
  }
  return std::nullopt;
}

Outcome minimax_classification() {
  long points = 0, mismatches = 0, nash_saddles = 0, nash_not_min = 0, saddles = 0, minimax = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Index d = 2 + static_cast<Index>(seed % 4), n = 1 + static_cast<Index>(seed % 3);
    auto p = make_random_minimax(d, n, 0.1, seed);
    const double rho = effective_rho_phi(derive_constants(p->constants()).rho_phi);
    std::vector<Vector> found;
    for (int start = 0; start < 25; ++start) {
      const Vector x0 = start == 0 ? Vector::Zero(d) : random_vector(d, seed * 100 + start, 2.0);
      const auto x = newton_stationary(*p, x0);
      if (!x) continue;
      bool dup = false;
      for (const Vector& f : found) dup = dup || (f - *x).norm() < 1e-8;
      if (!dup) found.push_back(*x);
    }
    for (const Vector& x : found) {
      ++points;
      const Vector y = p->ystar(x);
      const MinimaxClass mc = classify_minimax_point(*p, x, y);
      const Matrix h = p->hess_phi(x);
      const double lambda = Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues()[0];
      const double tol = 1e-8 * (1.0 + h.norm());
      const bool strict_min = p->grad_phi(x).norm() <= 1e-8 && lambda > tol;
      if (mc.strict_local_minimax != strict_min) ++mismatches;
      if (mc.strict_local_minimax) ++minimax;
      const PointClass pc = classify_point(*p, x, 1e-8, rho);
      if (pc.tag == PointClass::Tag::StrictSaddle) {
        ++saddles;
        if (mc.strict_local_nash) ++nash_saddles;
      }
      if (mc.strict_local_nash && !(pc.tag == PointClass::Tag::ApproxLocalMin && pc.lambda_min > 0.0)) ++nash_not_min;
    }
  }
  return {mismatches == 0 && nash_saddles == 0 && nash_not_min == 0 && points > 0,
          std::to_string(points) + " stationary points (" + std::to_string(minimax) + " strict local minimax, " +
              std::to_string(saddles) + " strict saddles); label mismatches " + std::to_string(mismatches) +
              ", saddles labeled Nash " + std::to_string(nash_saddles) + ", Nash not local min " +
              std::to_string(nash_not_min)};
}

// Runs the CLI; returns its exit code.
int run_cli(const std::string& args, const fs::path& out_dir, const fs::path& stdout_file) {
  const std::string cmd = "BILEVEL_ESCAPE_OUTPUT_DIR='" + out_dir.string() + "' '" + BILEVEL_CLI_PATH + "' " + args +
                          " > '" + stdout_file.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bilevel_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json sweep_config() {
  // Strict saddle at every grid point needs sqrt(rho_phi * 0.1) < 1, hence the
  // small quartic term and the well-conditioned lower level.
  json options = {{"mu", 10.0},       {"kappa", 1.0},     {"quartic_coef", 1e-4},
                  {"coupling", 0.1},  {"a_norm", 0.1}};
  return {{"schema_version", 1},
          {"problem", {{"type", "planted_saddle"}, {"d", 3}, {"n", 2}, {"neg_eig", -1.0}, {"seed", 3}, {"options", options}}},
          {"algorithm", "perturbed_aid"},
          {"iota", 2.0},
          {"K", 400000},
          {"seeds", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
          {"inner_init", "exact"},
          {"certified_exit", true},
          {"sweep", {{"axis", "epsilon"}, {"values", {1e-1, 3e-2, 1e-2}}}}};
}

Outcome complexity_scaling() {
  const fs::path dir = workdir("sweep");
  std::ofstream(dir / "sweep.json") << sweep_config().dump(2);
  const int code = run_cli("sweep '" + (dir / "sweep.json").string() + "'", dir / "out", dir / "stdout.txt");
  if (code != 0) return {false, "sweep exited with " + std::to_string(code)};
  std::ifstream in(dir / "out" / "sweep.json");
  const json result = json::parse(in);
  if (result.at("slope").is_null()) return {false, "no slope reported"};
  const double slope = result.at("slope").get<double>();
  std::string medians;
  for (const auto& m : result.at("median_iterations")) medians += " " + fmt(m.get<double>());
  std::ifstream csv(dir / "out" / "sweep.csv");
  std::string line, certified;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string v, med, cert;
    std::getline(ls, v, ',');
    std::getline(ls, med, ',');
    std::getline(ls, cert, ',');
    certified += " " + cert;
  }
  return {slope >= -2.5 && slope <= -1.5, "log-log slope " + fmt(slope) + " (need [-2.5, -1.5]); medians" + medians +
                                              "; certified per grid point" + certified};
}

struct StocSetup {
  PlantedSaddleProblem ps;
  std::shared_ptr<const FiniteSumBilevel> fs;
  PerturbConfig cfg;
  StocConfig scfg;
};

constexpr double kStocNoise = 1e-4;

StocSetup stoc_setup(std::uint64_t seed) {
  PlantedSaddleOptions o = gentle(1.0);
  o.strictness = 40.0;
  const Index d = 2 + static_cast<Index>(seed % 4);
  StocSetup s{make_planted_saddle(d, d, -0.15, seed, o), nullptr, {}, {}};
  s.fs = make_finite_sum(s.ps.problem, 50, kStocNoise, seed);
  const SmoothnessConstants& c = s.fs->constants();
  const DerivedConstants dc = derive_constants(c);
  const double eps = s.ps.epsilon_target;
  s.cfg = theory_params(c, dc, eps, 2.0, 0.1, ParamMode::Ineon);
  const AidDepths dd = aid_depths(c, aid_gamma1(c, s.cfg.eta, 1.0), eps, 2.0, DepthMode::Ineon);
  s.cfg.d_inner = dd.inner_steps;
  s.cfg.n_cg = dd.cg_steps;
  s.scfg.alpha = 2.0 / (c.ell + c.mu);
  s.scfg.beta = 1.0 / (4.0 * dc.l_phi);
  s.scfg.neumann_eta = 1.0 / c.ell;
  s.scfg.inner_steps = s.scfg.neumann_depth = static_cast<int>(std::ceil(dc.kappa * std::log(1.0 / eps)));
  s.scfg.inner_batch = s.scfg.batch_f = s.scfg.batch_g = 16;
  s.scfg.hessian_batch = 4;
  return s;
}

Outcome stochastic_sanity() {
  // Hypergradient estimator spread against batch size, at fixed (x, y*).
  auto base = random_coupled(3, 4, 31, 2.0);
  auto fs = make_finite_sum(base, 500, 1.0, 31);
  const Vector x = random_vector(3, 5);
  const Vector y = base->ystar(x);
  StocConfig cfg;
  cfg.neumann_eta = 1.0 / fs->constants().ell;
  cfg.neumann_depth = 8;
  cfg.inner_steps = 1;
  Vector v = base->grad_y_f(x, y), term = v;
  for (int j = 0; j < cfg.neumann_depth; ++j) {
    term = term - cfg.neumann_eta * base->hvp_yy_g(x, y, term);
    v += term;
  }
  v *= cfg.neumann_eta;
  const Vector mean_target = base->grad_x_f(x, y) - base->jvp_xy_g(x, y, v);
  std::vector<double> sizes{4, 16, 64, 256}, rms;
  for (double s : sizes) {
    cfg.batch_f = cfg.batch_g = cfg.inner_batch = static_cast<int>(s);
    cfg.hessian_batch = std::max(1, static_cast<int>(s) / cfg.neumann_depth);
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng = make_rng(seed);
      sum += (stocbio_estimate(*fs, x, y, sample_batches(*fs, cfg, rng), cfg).grad - mean_target).squaredNorm();
    }
    rms.push_back(std::sqrt(sum / 200.0));
  }
  const double slope = rate_fit(sizes, rms, FitSpace::Loglog).slope;
  const bool slope_ok = std::abs(slope + 0.5) <= 0.15;

  int good = 0, certified = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const StocSetup s = stoc_setup(seed);
    Rng rng = make_rng(seed);
    const Vector& x0 = s.ps.x_saddle;
    const RunTrace tr = stocbio_ineon(*s.fs, x0, s.ps.problem->ystar(x0), s.cfg, s.scfg, 200000, rng);
    if (tr.status != RunStatus::LocalMinCertified) continue;
    ++certified;
    if (nearest(s.ps.minima, tr.x_final) <= s.cfg.s_script) ++good;
  }
  return {slope_ok && good >= 80, "estimator spread slope " + fmt(slope) + " (need -0.5 +- 0.15); certified " +
                                      std::to_string(certified) + "/100, within S of a planted minimum " +
                                      std::to_string(good) + "/100 (need 80), noise " + fmt(kStocNoise)};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(a)) names.insert(fs::relative(e.path(), a).string());
  for (const auto& e : fs::recursive_directory_iterator(b)) names.insert(fs::relative(e.path(), b).string());
  for (const std::string& n : names) {
    const fs::path pa = a / n, pb = b / n;
    if (fs::is_directory(pa) || fs::is_directory(pb)) continue;
    std::ifstream ia(pa, std::ios::binary), ib(pb, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(ia)), {}), cb((std::istreambuf_iterator<char>(ib)), {});
    if (!fs::exists(pa) || !fs::exists(pb) || ca != cb) {
      why = n;
      return false;
    }
  }
  return true;
}

Outcome determinism() {
  const fs::path dir = workdir("determinism");
  json run = {{"schema_version", 1},
              {"problem", {{"type", "planted_saddle"}, {"d", 4}, {"n", 3}, {"neg_eig", -0.15}, {"seed", 2},
                           {"options", {{"coupling", 0.3}, {"a_norm", 0.3}}}}},
              {"algorithm", "perturbed_aid"},
              {"iota", 5.0},
              {"K", 3000},
              {"seeds", {0, 1, 2}},
              {"snapshot_stride", 100}};
  json probe = run;
  probe["algorithm"] = "ineon_probe";
  probe["iota"] = 20.0;
  probe["depths"] = "explicit";
  json stoc = {{"schema_version", 1},
               {"problem", {{"type", "finite_sum"}, {"num_components", 20}, {"noise", 0.01}, {"seed", 4},
                            {"base", run["problem"]}}},
               {"algorithm", "stocbio_ineon"},
               {"iota", 2.0},
               {"depths", "explicit"},
               {"K", 2000},
               {"seeds", {5, 6}}};
  json gdmax = {{"schema_version", 1},
                {"problem", {{"type", "random_minimax"}, {"d", 3}, {"n", 2}, {"quartic_coef", 0.1}, {"seed", 7}}},
                {"algorithm", "perturbed_gdmax"},
                {"epsilon", 1e-3},
                {"K", 500},
                {"seeds", {0, 9}}};
  json sweep = run;
  sweep["K"] = 500;
  sweep["sweep"] = {{"axis", "kappa"}, {"values", {1.0, 2.0, 3.0}}};

  const std::vector<std::pair<std::string, json>> configs{
      {"run", run}, {"run", probe}, {"run", stoc}, {"run", gdmax}, {"verify-constants", run}, {"sweep", sweep}};
  int compared = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path cfg = dir / ("config" + std::to_string(i) + ".json");
    std::ofstream(cfg) << configs[i].second.dump(2);
    for (const char* pass : {"a", "b"}) {
      const fs::path out = dir / pass / std::to_string(i);
      fs::create_directories(out);
      const int code = run_cli(configs[i].first + " '" + cfg.string() + "'", out, out / "stdout.txt");
      if (code != 0) return {false, configs[i].first + " config " + std::to_string(i) + " exited with " +
                                        std::to_string(code)};
    }
    std::string why;
    if (!same_tree(dir / "a" / std::to_string(i), dir / "b" / std::to_string(i), why)) {
      return {false, "outputs differ for config " + std::to_string(i) + ": " + why};
    }
    ++compared;
  }
  return {true, std::to_string(compared) + " commands reproduced byte-identical outputs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "hypergradient exactness", 10, hypergradient_exactness},
      {2, "AID error budget", 30, aid_error_budget},
      {3, "contraction rates", 5, contraction_rates},
      {4, "Neumann correctness", 5, neumann_correctness},
      {5, "saddle escape", 120, saddle_escape},
      {6, "iNEON curvature guarantee", 120, ineon_curvature},
      {7, "descent inequality", 30, descent_inequality},
      {8, "minimax classification", 10, minimax_classification},
      {9, "complexity scaling", 600, complexity_scaling},
      {10, "stochastic sanity", 300, stochastic_sanity},
      {11, "determinism", 600, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::cout << "criterion " << c.id << " [" << c.name << "]: " << (pass ? "PASS" : "FAIL") << " - " << out.detail
              << "; " << fmt(secs) << " s (limit " << fmt(c.limit_seconds) << " s" << (in_time ? "" : ", EXCEEDED")
              << ")" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
