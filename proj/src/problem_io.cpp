#include "bilevel/problem_io.hpp"

#include <algorithm>
#include <fstream>

#include "bilevel/errors.hpp"

namespace bilevel {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& item : j.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(), [&](const char* key) { return item.key() == key; });
    if (!known) throw InvalidArgument(where + ": unknown key '" + item.key() + "'");
  }
}

namespace {

double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidArgument(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw InvalidArgument(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

double number_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

long integer(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidArgument(where + ": missing '" + key + "'");
  if (!j.at(key).is_number_integer()) throw InvalidArgument(where + ": '" + key + "' must be an integer");
  return j.at(key).get<long>();
}

std::uint64_t seed_of(const json& j, const std::string& where) {
  if (!j.contains("seed")) return 0;
  if (!j.at("seed").is_number_unsigned()) throw InvalidArgument(where + ": 'seed' must be a nonnegative integer");
  return j.at("seed").get<std::uint64_t>();
}

PlantedSaddleOptions planted_options(const json& j) {
  PlantedSaddleOptions o;
  if (j.is_null()) return o;
  const std::string where = "planted_saddle.options";
  reject_unknown_keys(j, {"mu", "kappa", "quartic_coef", "coupling", "a_norm", "box_margin", "strictness", "rho_floor"},
                      where);
  o.mu = number_or(j, "mu", o.mu, where);
  o.kappa = number_or(j, "kappa", o.kappa, where);
  o.quartic_coef = number_or(j, "quartic_coef", o.quartic_coef, where);
  o.coupling = number_or(j, "coupling", o.coupling, where);
  o.a_norm = number_or(j, "a_norm", o.a_norm, where);
  o.box_margin = number_or(j, "box_margin", o.box_margin, where);
  o.strictness = number_or(j, "strictness", o.strictness, where);
  o.rho_floor = number_or(j, "rho_floor", o.rho_floor, where);
  return o;
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw InvalidArgument(name + ": expected a nonempty array of rows");
  const Index rows = static_cast<Index>(j.size());
  Index cols = -1;
  Matrix m;
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw InvalidArgument(name + ": row " + std::to_string(i) + " is not an array");
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      if (cols == 0) throw InvalidArgument(name + ": empty row");
      m.resize(rows, cols);
    }
    if (static_cast<Index>(row.size()) != cols) throw InvalidArgument(name + ": ragged rows");
    for (Index k = 0; k < cols; ++k) {
      const json& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw InvalidArgument(name + ": non-numeric entry");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw InvalidArgument(name + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument(name + ": non-numeric entry");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json constants_to_json(const SmoothnessConstants& c) {
  return json{{"mu", c.mu}, {"ell", c.ell}, {"rho", c.rho}, {"nu", c.nu}, {"m_bound", c.m_bound}, {"sigma2", c.sigma2}};
}

SmoothnessConstants constants_from_json(const json& j) {
  const std::string where = "constants";
  reject_unknown_keys(j, {"mu", "ell", "rho", "nu", "m_bound", "sigma2"}, where);
  SmoothnessConstants c;
  c.mu = number(j, "mu", where);
  c.ell = number(j, "ell", where);
  c.rho = number_or(j, "rho", 0.0, where);
  c.nu = number_or(j, "nu", 0.0, where);
  c.m_bound = number_or(j, "m_bound", 0.0, where);
  c.sigma2 = number_or(j, "sigma2", 0.0, where);
  c.validate();
  return c;
}

json problem_to_json(const QuadraticCoupledBilevel& p) {
  const auto& d = p.data();
  return json{{"type", "quadratic_coupled"},   {"Q", to_json(d.Q)},
              {"B", to_json(d.B)},             {"c", to_json(d.c)},
              {"P_upper", to_json(d.P_upper)}, {"quartic_coef", d.quartic_coef},
              {"a", to_json(d.a)},             {"p_lin", to_json(d.p_lin)},
              {"box_radius", d.box_radius},    {"constants", constants_to_json(p.constants())}};
}

json problem_to_json(const MinimaxQuadratic& p) {
  const auto& d = p.data();
  return json{{"type", "minimax_quadratic"},
              {"A_x", to_json(d.A_x)},
              {"B", to_json(d.B)},
              {"C", to_json(d.C)},
              {"quartic_coef", d.quartic_coef},
              {"box_radius", d.box_radius},
              {"constants", constants_to_json(p.constants())}};
}

ProblemBundle problem_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw InvalidArgument("problem: expected an object with a string 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  ProblemBundle out;
  out.type = type;

  if (type == "quadratic_coupled") {
    reject_unknown_keys(j, {"type", "Q", "B", "c", "P_upper", "a", "quartic_coef", "p_lin", "box_radius", "constants"},
                        type);
    QuadraticCoupledBilevel::Data d;
    d.Q = matrix_from_json(j.at("Q"), "Q");
    d.B = matrix_from_json(j.at("B"), "B");
    d.c = j.contains("c") ? vector_from_json(j.at("c"), "c") : Vector::Zero(d.B.rows());
    d.P_upper = matrix_from_json(j.at("P_upper"), "P_upper");
    d.a = j.contains("a") ? vector_from_json(j.at("a"), "a") : Vector::Zero(d.B.rows());
    d.quartic_coef = number_or(j, "quartic_coef", 0.0, type);
    if (j.contains("p_lin")) d.p_lin = vector_from_json(j.at("p_lin"), "p_lin");
    d.box_radius = number_or(j, "box_radius", 1.0, type);
    if (j.contains("constants")) {
      out.problem = std::make_shared<const QuadraticCoupledBilevel>(std::move(d), constants_from_json(j.at("constants")));
    } else {
      out.problem = std::make_shared<const QuadraticCoupledBilevel>(std::move(d));
    }
  } else if (type == "minimax_quadratic") {
    reject_unknown_keys(j, {"type", "A_x", "B", "C", "quartic_coef", "box_radius", "constants"}, type);
    MinimaxQuadratic::Data d;
    d.A_x = matrix_from_json(j.at("A_x"), "A_x");
    d.B = matrix_from_json(j.at("B"), "B");
    d.C = matrix_from_json(j.at("C"), "C");
    d.quartic_coef = number_or(j, "quartic_coef", 0.0, type);
    d.box_radius = number_or(j, "box_radius", 1.0, type);
    if (j.contains("constants")) {
      out.problem = std::make_shared<const MinimaxQuadratic>(std::move(d), constants_from_json(j.at("constants")));
    } else {
      out.problem = std::make_shared<const MinimaxQuadratic>(std::move(d));
    }
  } else if (type == "planted_saddle") {
    reject_unknown_keys(j, {"type", "d", "n", "neg_eig", "seed", "options"}, type);
    const json options = j.contains("options") ? j.at("options") : json();
    auto planted = make_planted_saddle(integer(j, "d", type), integer(j, "n", type), number(j, "neg_eig", type),
                                       seed_of(j, type), planted_options(options));
    out.problem = planted.problem;
    out.planted = std::move(planted);
  } else if (type == "random_minimax") {
    reject_unknown_keys(j, {"type", "d", "n", "quartic_coef", "seed"}, type);
    out.problem = make_random_minimax(integer(j, "d", type), integer(j, "n", type),
                                      number_or(j, "quartic_coef", 0.0, type), seed_of(j, type));
  } else if (type == "finite_sum") {
    reject_unknown_keys(j, {"type", "base", "num_components", "noise", "seed"}, type);
    if (!j.contains("base")) throw InvalidArgument("finite_sum: missing 'base'");
    ProblemBundle base = problem_from_json(j.at("base"));
    auto quad = std::dynamic_pointer_cast<const QuadraticCoupledBilevel>(base.problem);
    if (!quad) throw InvalidArgument("finite_sum: base must be quadratic_coupled or planted_saddle");
    out.finite_sum = make_finite_sum(quad, static_cast<int>(integer(j, "num_components", type)),
                                     number(j, "noise", type), seed_of(j, type));
    out.problem = quad;
    out.planted = std::move(base.planted);
  } else {
    throw InvalidArgument("problem: unknown type '" + type + "'");
  }
  return out;
}

ProblemBundle load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open problem file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("problem file '" + path + "': " + e.what());
  }
  return problem_from_json(j);
}

}  // namespace bilevel
