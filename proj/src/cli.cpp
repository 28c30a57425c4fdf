#include "bilevel/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "bilevel/diagnostics.hpp"
#include "bilevel/errors.hpp"
#include "bilevel/reference.hpp"
#include "bilevel/solvers.hpp"

namespace bilevel {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::PerturbedGdmax:
      return "perturbed_gdmax";
    case Algorithm::PerturbedAid:
      return "perturbed_aid";
    case Algorithm::IneonProbe:
      return "ineon_probe";
    case Algorithm::StocbioIneon:
      return "stocbio_ineon";
  }
  return "unknown";
}

namespace {

double get_number(const json& j, const char* key) {
  if (!j.at(key).is_number()) throw InvalidArgument(std::string("config: '") + key + "' must be a number");
  return j.at(key).get<double>();
}

long get_integer(const json& j, const char* key) {
  if (!j.at(key).is_number_integer()) throw InvalidArgument(std::string("config: '") + key + "' must be an integer");
  return j.at(key).get<long>();
}

std::string get_string(const json& j, const char* key) {
  if (!j.at(key).is_string()) throw InvalidArgument(std::string("config: '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "perturbed_gdmax") return Algorithm::PerturbedGdmax;
  if (name == "perturbed_aid") return Algorithm::PerturbedAid;
  if (name == "ineon_probe") return Algorithm::IneonProbe;
  if (name == "stocbio_ineon") return Algorithm::StocbioIneon;
  throw InvalidArgument("config: unknown algorithm '" + name + "'");
}

}  // namespace

ExperimentConfig parse_experiment(const json& j, const std::string& base_dir) {
  reject_unknown_keys(j,
                      {"schema_version", "problem", "problem_file", "algorithm", "epsilon", "iota", "delta",
                       "rho_floor", "c_order", "K", "seeds", "output_dir", "snapshot_stride", "certified_exit",
                       "depths", "start", "inner_init", "stoc", "sweep"},
                      "config");
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<int>() != kConfigSchemaVersion) {
    throw InvalidArgument("config: 'schema_version' must be " + std::to_string(kConfigSchemaVersion));
  }

  ExperimentConfig cfg;
  if (j.contains("problem") == j.contains("problem_file")) {
    throw InvalidArgument("config: give exactly one of 'problem' and 'problem_file'");
  }
  if (j.contains("problem")) {
    cfg.problem = j.at("problem");
  } else {
    const fs::path path = fs::path(base_dir) / get_string(j, "problem_file");
    std::ifstream in(path);
    if (!in) throw InvalidArgument("config: cannot open problem file '" + path.string() + "'");
    cfg.problem = json::parse(in);
  }
  if (!j.contains("algorithm")) throw InvalidArgument("config: missing 'algorithm'");
  cfg.algorithm = parse_algorithm(get_string(j, "algorithm"));

  if (j.contains("epsilon")) {
    cfg.epsilon = get_number(j, "epsilon");
    if (!(*cfg.epsilon > 0.0)) throw InvalidArgument("config: epsilon must be positive");
  }
  if (j.contains("iota")) cfg.iota = get_number(j, "iota");
  if (!(cfg.iota > 1.0)) throw InvalidIota("config: iota must satisfy iota > 1 (got " + format_double(cfg.iota) + ")");
  if (j.contains("delta")) cfg.delta = get_number(j, "delta");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw InvalidArgument("config: delta must lie in (0, 1)");
  if (j.contains("rho_floor")) cfg.rho_floor = get_number(j, "rho_floor");
  if (!(cfg.rho_floor > 0.0)) throw InvalidArgument("config: rho_floor must be positive");
  if (j.contains("c_order")) cfg.c_order = get_number(j, "c_order");
  if (!(cfg.c_order > 0.0)) throw InvalidArgument("config: c_order must be positive");
  if (j.contains("K")) cfg.max_iters = get_integer(j, "K");
  if (cfg.max_iters < 1) throw InvalidArgument("config: K must be >= 1");

  if (j.contains("seeds")) {
    const json& seeds = j.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw InvalidArgument("config: 'seeds' must be a nonempty array");
    cfg.seeds.clear();
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned()) throw InvalidArgument("config: seeds must be nonnegative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("output_dir")) cfg.output_dir = get_string(j, "output_dir");
  if (j.contains("snapshot_stride")) cfg.snapshot_stride = static_cast<int>(get_integer(j, "snapshot_stride"));
  if (cfg.snapshot_stride < 0) throw InvalidArgument("config: snapshot_stride must be >= 0");
  if (j.contains("certified_exit")) {
    if (!j.at("certified_exit").is_boolean()) throw InvalidArgument("config: 'certified_exit' must be a boolean");
    cfg.certified_exit = j.at("certified_exit").get<bool>();
  }
  if (j.contains("depths")) {
    const std::string rule = get_string(j, "depths");
    if (rule == "order") {
      cfg.depths = DepthRule::Order;
    } else if (rule == "explicit") {
      cfg.depths = DepthRule::Explicit;
    } else {
      throw InvalidArgument("config: depths must be 'order' or 'explicit'");
    }
  }
  if (j.contains("start")) {
    if (j.at("start").is_array()) {
      cfg.x0 = vector_from_json(j.at("start"), "start");
      cfg.start = "explicit";
    } else {
      cfg.start = get_string(j, "start");
      if (cfg.start != "saddle" && cfg.start != "minimum" && cfg.start != "origin") {
        throw InvalidArgument("config: start must be 'saddle', 'minimum', 'origin' or a vector");
      }
    }
  }
  if (j.contains("inner_init")) {
    const std::string init = get_string(j, "inner_init");
    if (init != "zero" && init != "exact") throw InvalidArgument("config: inner_init must be 'zero' or 'exact'");
    cfg.exact_inner_init = init == "exact";
  }
  if (j.contains("stoc")) {
    cfg.stoc = j.at("stoc");
    reject_unknown_keys(cfg.stoc,
                        {"alpha", "beta", "neumann_eta", "inner_steps", "neumann_depth", "inner_batch", "hessian_batch",
                         "batch_f", "batch_g"},
                        "config.stoc");
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown_keys(s, {"axis", "values"}, "config.sweep");
    SweepSpec grid;
    grid.axis = get_string(s, "axis");
    if (grid.axis != "epsilon" && grid.axis != "kappa") throw InvalidArgument("config: sweep axis must be epsilon or kappa");
    if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty()) {
      throw InvalidArgument("config: sweep values must be a nonempty array");
    }
    for (const auto& v : s.at("values")) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) throw InvalidArgument("config: sweep values must be positive");
      grid.values.push_back(v.get<double>());
    }
    cfg.sweep = std::move(grid);
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("config file '" + path + "': " + e.what());
  }
  return parse_experiment(j, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

namespace {

struct Prepared {
  ProblemBundle bundle;
  SmoothnessConstants constants;
  DerivedConstants derived;
  PerturbConfig params;
  StocConfig stoc;
  Vector x0, y0, v0;
  double delta_hat = 0.0;
};

ParamMode mode_of(Algorithm a) {
  return (a == Algorithm::IneonProbe || a == Algorithm::StocbioIneon) ? ParamMode::Ineon : ParamMode::Alg1;
}

// Solution of G_yy v = grad_y f at (x, y).
Vector exact_v(const BilevelProblem& p, const Vector& x, const Vector& y) {
  const auto hvp = [&](const Vector& v) -> Vector { return p.hvp_yy_g(x, y, v); };
  const int steps = static_cast<int>(10 * p.dim_y() + 50);
  return cg_solve<double>(hvp, p.grad_y_f(x, y), Vector::Zero(p.dim_y()), steps).solution;
}

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared out;
  out.bundle = problem_from_json(cfg.problem);
  const BilevelProblem& p = *out.bundle.problem;
  if (cfg.algorithm == Algorithm::StocbioIneon && !out.bundle.finite_sum) {
    throw InvalidArgument("config: stocbio_ineon needs a finite_sum problem");
  }
  if (cfg.algorithm == Algorithm::PerturbedGdmax && p.structure() != Structure::Minimax) {
    throw InvalidArgument("config: perturbed_gdmax needs a minimax problem");
  }
  out.constants = out.bundle.finite_sum ? out.bundle.finite_sum->constants() : p.constants();
  out.derived = derive_constants(out.constants);

  double epsilon = 0.0;
  if (cfg.epsilon) {
    epsilon = *cfg.epsilon;
  } else if (out.bundle.planted) {
    epsilon = out.bundle.planted->epsilon_target;
  } else {
    throw InvalidArgument("config: 'epsilon' is required for problems without a planted target");
  }

  TheoryOptions topts;
  topts.rho_floor = cfg.rho_floor;
  topts.c_order = cfg.c_order;
  topts.dim = p.dim_x();
  out.params = theory_params(out.constants, out.derived, epsilon, cfg.iota, cfg.delta, mode_of(cfg.algorithm), topts);

  if (cfg.start == "explicit") {
    if (cfg.x0->size() != p.dim_x()) throw InvalidArgument("config: start vector has the wrong dimension");
    out.x0 = *cfg.x0;
  } else if (cfg.start == "saddle" || (cfg.start == "default" && out.bundle.planted)) {
    if (!out.bundle.planted) throw InvalidArgument("config: start 'saddle' needs a planted problem");
    out.x0 = out.bundle.planted->x_saddle;
  } else if (cfg.start == "minimum") {
    if (!out.bundle.planted) throw InvalidArgument("config: start 'minimum' needs a planted problem");
    out.x0 = out.bundle.planted->x_min;
  } else {
    out.x0 = Vector::Zero(p.dim_x());
  }

  const Vector y_star = reference_ystar(p, out.x0, 1e-12);
  const Vector v_star = exact_v(p, out.x0, y_star);
  out.y0 = cfg.exact_inner_init ? y_star : Vector::Zero(p.dim_y());
  out.v0 = cfg.exact_inner_init ? v_star : Vector::Zero(p.dim_y());
  out.delta_hat = (out.y0 - y_star).norm() + (out.v0 - v_star).norm();

  if (cfg.depths == DepthRule::Explicit) {
    const DepthMode dm = out.params.mode == ParamMode::Alg1 ? DepthMode::Descent : DepthMode::Ineon;
    const AidDepths dd =
        aid_depths(out.constants, aid_gamma1(out.constants, out.params.eta, out.delta_hat), epsilon, cfg.iota, dm);
    out.params.d_inner = dd.inner_steps;
    out.params.n_cg = dd.cg_steps;
  }

  StocConfig& s = out.stoc;
  const SmoothnessConstants& c = out.constants;
  s.alpha = 2.0 / (c.ell + c.mu);
  s.beta = 1.0 / (4.0 * out.derived.l_phi);
  s.neumann_eta = 1.0 / c.ell;
  s.inner_steps = std::max(1, static_cast<int>(std::ceil(cfg.c_order * out.derived.kappa * std::log(1.0 / epsilon))));
  s.neumann_depth = s.inner_steps;
  s.c_order = cfg.c_order;
  const json& o = cfg.stoc;
  if (o.contains("alpha")) s.alpha = get_number(o, "alpha");
  if (o.contains("beta")) s.beta = get_number(o, "beta");
  if (o.contains("neumann_eta")) s.neumann_eta = get_number(o, "neumann_eta");
  if (o.contains("inner_steps")) s.inner_steps = static_cast<int>(get_integer(o, "inner_steps"));
  if (o.contains("neumann_depth")) s.neumann_depth = static_cast<int>(get_integer(o, "neumann_depth"));
  if (o.contains("inner_batch")) s.inner_batch = static_cast<int>(get_integer(o, "inner_batch"));
  if (o.contains("hessian_batch")) s.hessian_batch = static_cast<int>(get_integer(o, "hessian_batch"));
  if (o.contains("batch_f")) s.batch_f = static_cast<int>(get_integer(o, "batch_f"));
  if (o.contains("batch_g")) s.batch_g = static_cast<int>(get_integer(o, "batch_g"));
  s.validate();
  return out;
}

json params_to_json(const PerturbConfig& c) {
  return json{{"epsilon", c.epsilon},
              {"iota", c.iota},
              {"delta", c.delta},
              {"delta_implied", c.delta_implied},
              {"eta", c.eta},
              {"tau", c.tau},
              {"r", c.r},
              {"t_script", c.t_script},
              {"f_script", c.f_script},
              {"s_script", c.s_script},
              {"d_inner", c.d_inner},
              {"n_cg", c.n_cg},
              {"rho_phi_eff", c.rho_phi_eff},
              {"mode", c.mode == ParamMode::Alg1 ? "alg1" : "ineon"}};
}

json stoc_to_json(const StocConfig& s) {
  return json{{"alpha", s.alpha},
              {"beta", s.beta},
              {"neumann_eta", s.neumann_eta},
              {"inner_steps", s.inner_steps},
              {"neumann_depth", s.neumann_depth},
              {"inner_batch", s.inner_batch},
              {"hessian_batch", s.hessian_batch},
              {"batch_f", s.batch_f},
              {"batch_g", s.batch_g},
              {"c_order", s.c_order}};
}

struct SeedRun {
  RunTrace trace;
  json summary;
};

std::optional<long> certification_iteration(const RunTrace& trace) {
  if (trace.status != RunStatus::LocalMinCertified) return std::nullopt;
  return trace.first_phase("certified");
}

SeedRun run_seed(const ExperimentConfig& cfg, const Prepared& prep, std::uint64_t seed) {
  const BilevelProblem& p = *prep.bundle.problem;
  Rng rng = make_rng(seed);
  RunOptions opts;
  opts.certified_exit = cfg.certified_exit;
  opts.snapshot_stride = cfg.snapshot_stride;
  opts.seed = seed;

  SeedRun run;
  json extra = json::object();
  switch (cfg.algorithm) {
    case Algorithm::PerturbedGdmax:
    case Algorithm::PerturbedAid: {
      const HypergradOption option =
          cfg.algorithm == Algorithm::PerturbedGdmax ? HypergradOption::GDmax : HypergradOption::AID;
      run.trace = perturbed_descent(p, prep.x0, prep.y0, prep.v0, prep.params, option, cfg.max_iters, rng, opts);
      if (p.analytic() && !run.trace.records.empty()) {
        std::vector<double> phis;
        for (const auto& rec : run.trace.records) phis.push_back(rec.phi.value_or(0.0));
        extra["escape_event"] = escape_event(run.trace, prep.params, phis);
      }
      break;
    }
    case Algorithm::IneonProbe: {
      AidOracle oracle(p, prep.y0, prep.v0, prep.params.tau, prep.params.d_inner, prep.params.n_cg);
      TraceRecord rec;
      rec.k = 0;
      rec.phase = "neon";
      rec.grad_est_norm = oracle.grad(prep.x0).norm();
      if (p.analytic()) rec.phi = p.analytic()->phi(prep.x0);
      run.trace.seed = seed;
      try {
        const IneonResult res = ineon([&](const Vector& z) { return oracle.grad(z); },
                                      [&](const Vector& z) { return oracle.phi(z); }, prep.x0, prep.params, rng);
        run.trace.neon_events.push_back(NeonEvent{0, res.found, res.iterations});
        run.trace.status = res.found ? RunStatus::MaxIters : RunStatus::NeonReturnedZero;
        extra["direction"] = to_json(res.direction);
        if (res.found && p.analytic()) {
          extra["rayleigh_quotient"] = res.direction.dot(p.analytic()->hess_phi(prep.x0) * res.direction);
        }
      } catch (const NumericalError& e) {
        run.trace.failure = e.what();
      }
      run.trace.records.push_back(std::move(rec));
      run.trace.x_final = prep.x0;
      break;
    }
    case Algorithm::StocbioIneon:
      run.trace = stocbio_ineon(*prep.bundle.finite_sum, prep.x0, prep.y0, prep.params, prep.stoc, cfg.max_iters, rng,
                                opts);
      break;
  }

  json s = {{"seed", seed},
            {"status", to_string(run.trace.status)},
            {"iterations", run.trace.records.size()},
            {"perturbations", run.trace.perturbation_iterations},
            {"x_final", to_json(run.trace.x_final)}};
  const auto cert = certification_iteration(run.trace);
  s["iterations_to_certification"] = cert ? json(*cert) : json(nullptr);
  json neon = json::array();
  for (const auto& e : run.trace.neon_events) {
    neon.push_back({{"k", e.k}, {"found", e.found}, {"iterations", e.iterations}});
  }
  s["neon_events"] = neon;
  if (p.analytic() && run.trace.x_final.size() == p.dim_x()) {
    const PointClass pc = classify_point(p, run.trace.x_final, prep.params.epsilon, prep.params.rho_phi_eff);
    s["terminal"] = {{"class", to_string(pc.tag)}, {"grad_norm", pc.grad_norm}, {"lambda_min", pc.lambda_min}};
    if (prep.bundle.planted) {
      double dist = std::numeric_limits<double>::infinity();
      for (const Vector& m : prep.bundle.planted->minima) dist = std::min(dist, (run.trace.x_final - m).norm());
      s["terminal"]["distance_to_planted_minimum"] = dist;
    }
  }
  for (const auto& item : extra.items()) s[item.key()] = item.value();
  s["failure"] = run.trace.failure ? json(*run.trace.failure) : json(nullptr);
  run.summary = std::move(s);
  return run;
}

fs::path output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return fs::path(env);
  return fs::path(cfg.output_dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

json header_json(const ExperimentConfig& cfg, const Prepared& prep) {
  json h = {{"schema_version", kConfigSchemaVersion},
            {"algorithm", to_string(cfg.algorithm)},
            {"problem_type", prep.bundle.type},
            {"dim_x", prep.bundle.problem->dim_x()},
            {"dim_y", prep.bundle.problem->dim_y()},
            {"constants", constants_to_json(prep.constants)},
            {"derived", {{"kappa", prep.derived.kappa}, {"l_phi", prep.derived.l_phi}, {"rho_phi", prep.derived.rho_phi}}},
            {"params", params_to_json(prep.params)},
            {"K", cfg.max_iters},
            {"certified_exit", cfg.certified_exit}};
  if (cfg.algorithm == Algorithm::StocbioIneon) h["stoc"] = stoc_to_json(prep.stoc);
  return h;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment(config_path);
    const Prepared prep = prepare(cfg);
    const fs::path dir = output_dir(cfg);
    fs::create_directories(dir);

    json summary = header_json(cfg, prep);
    summary["runs"] = json::array();
    bool failed = false;
    for (std::uint64_t seed : cfg.seeds) {
      SeedRun run = run_seed(cfg, prep, seed);
      std::ofstream csv(dir / ("trace_seed" + std::to_string(seed) + ".csv"), std::ios::binary);
      write_trace_csv(csv, run.trace);
      if (run.trace.failure) {
        failed = true;
        err << "seed " << seed << ": " << *run.trace.failure << '\n';
      }
      out << "seed " << seed << ": " << to_string(run.trace.status) << " after " << run.trace.records.size()
          << " iterations\n";
      summary["runs"].push_back(std::move(run.summary));
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return failed ? kExitNumerical : kExitOk;
  });
}

int cmd_verify_constants(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment(config_path);
    const Prepared prep = prepare(cfg);
    const auto row = [&](const char* name, double value) { out << name << ' ' << format_double(value) << '\n'; };
    const SmoothnessConstants& c = prep.constants;
    row("mu", c.mu);
    row("ell", c.ell);
    row("rho", c.rho);
    row("nu", c.nu);
    row("m_bound", c.m_bound);
    row("sigma2", c.sigma2);
    row("kappa", prep.derived.kappa);
    row("l_phi", prep.derived.l_phi);
    row("rho_phi", prep.derived.rho_phi);
    row("rho_phi_eff", prep.params.rho_phi_eff);
    if (prep.derived.rho_phi < cfg.rho_floor) {
      out << "notice rho_phi below floor; using rho_floor " << format_double(cfg.rho_floor) << '\n';
    }
    const PerturbConfig& p = prep.params;
    row("epsilon", p.epsilon);
    row("iota", p.iota);
    row("delta", p.delta);
    row("delta_implied", p.delta_implied);
    row("eta", p.eta);
    row("tau", p.tau);
    row("r", p.r);
    out << "t_script " << p.t_script << '\n';
    row("f_script", p.f_script);
    row("s_script", p.s_script);
    out << "d_inner " << p.d_inner << '\n';
    out << "n_cg " << p.n_cg << '\n';
    if (prep.bundle.planted) {
      const auto& planted = *prep.bundle.planted;
      const Matrix h = planted.problem->hess_phi(planted.x_saddle);
      row("saddle_lambda_min", Eigen::SelfAdjointEigenSolver<Matrix>(h, Eigen::EigenvaluesOnly).eigenvalues()(0));
      row("saddle_target", planted.neg_eig);
      row("epsilon_target", planted.epsilon_target);
    }
    return kExitOk;
  });
}

int cmd_sweep(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig base = load_experiment(config_path);
    if (!base.sweep) throw InvalidArgument("config: sweep needs a 'sweep' block");
    const SweepSpec& grid = *base.sweep;
    const fs::path dir = output_dir(base);
    fs::create_directories(dir);

    std::vector<double> medians;
    std::string csv = "value,median_iterations,certified,runs\n";
    bool failed = false;
    for (double value : grid.values) {
      ExperimentConfig cfg = base;
      if (grid.axis == "epsilon") {
        cfg.epsilon = value;
      } else {
        json* options = nullptr;
        if (cfg.problem.value("type", "") == "planted_saddle") {
          options = &cfg.problem["options"];
        } else if (cfg.problem.value("type", "") == "finite_sum" &&
                   cfg.problem.at("base").value("type", "") == "planted_saddle") {
          options = &cfg.problem["base"]["options"];
        } else {
          throw InvalidArgument("config: kappa sweeps need a planted_saddle problem");
        }
        if (options->is_null()) *options = json::object();
        (*options)["kappa"] = value;
      }
      const Prepared prep = prepare(cfg);
      std::vector<double> iterations;
      int certified = 0;
      for (std::uint64_t seed : cfg.seeds) {
        const SeedRun run = run_seed(cfg, prep, seed);
        if (run.trace.failure) {
          failed = true;
          err << "value " << format_double(value) << " seed " << seed << ": " << *run.trace.failure << '\n';
        }
        const auto cert = certification_iteration(run.trace);
        if (cert) ++certified;
        iterations.push_back(cert ? static_cast<double>(*cert) : static_cast<double>(run.trace.records.size()));
      }
      const double med = median(iterations);
      medians.push_back(med);
      csv += format_double(value) + "," + format_double(med) + "," + std::to_string(certified) + "," +
             std::to_string(cfg.seeds.size()) + "\n";
    }
    write_text(dir / "sweep.csv", csv);

    json fit_json = {{"axis", grid.axis}, {"values", grid.values}, {"median_iterations", medians}};
    try {
      const RateFit fit = rate_fit(grid.values, medians, FitSpace::Loglog);
      fit_json["slope"] = fit.slope;
      fit_json["r_squared"] = fit.r_squared;
      out << "slope " << format_double(fit.slope) << " r_squared " << format_double(fit.r_squared) << '\n';
    } catch (const InvalidArgument& e) {
      fit_json["slope"] = nullptr;
      fit_json["warning"] = e.what();
      err << "warning: " << e.what() << '\n';
    }
    write_text(dir / "sweep.json", fit_json.dump(2) + "\n");
    return failed ? kExitNumerical : kExitOk;
  });
}

}  // namespace bilevel
