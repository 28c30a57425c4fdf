#pragma once

// JSON problem descriptions. Matrices are row-major nested arrays; constants,
// when given, override the box bounds computed at construction.
//
//   {"type": "quadratic_coupled", "Q": [[...]], "B": [[...]], "c": [...], "P_upper": [[...]],
//    "a": [...], "quartic_coef": 0.1, "p_lin": [...], "box_radius": 1.0, "constants": {...}}
//   {"type": "minimax_quadratic", "A_x": [[...]], "B": [[...]], "C": [[...]], "quartic_coef": 0.0, ...}
//   {"type": "planted_saddle", "d": 2, "n": 2, "neg_eig": -1.0, "seed": 0, "options": {...}}
//   {"type": "random_minimax", "d": 2, "n": 2, "quartic_coef": 0.1, "seed": 0}
//   {"type": "finite_sum", "base": {...}, "num_components": 50, "noise": 0.01, "seed": 0}

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "bilevel/problem.hpp"
#include "bilevel/testbed.hpp"

namespace bilevel {

struct ProblemBundle {
  std::shared_ptr<const BilevelProblem> problem;
  std::shared_ptr<const FiniteSumBilevel> finite_sum;  // set for "finite_sum"
  std::optional<PlantedSaddleProblem> planted;         // set when the problem (or its base) is planted
  std::string type;
};

/// Throws InvalidArgument on schema violations (unknown keys included).
ProblemBundle problem_from_json(const nlohmann::json& j);
ProblemBundle load_problem_file(const std::string& path);

nlohmann::json problem_to_json(const QuadraticCoupledBilevel& p);
nlohmann::json problem_to_json(const MinimaxQuadratic& p);

nlohmann::json constants_to_json(const SmoothnessConstants& c);
SmoothnessConstants constants_from_json(const nlohmann::json& j);

Matrix matrix_from_json(const nlohmann::json& j, const std::string& name);
Vector vector_from_json(const nlohmann::json& j, const std::string& name);
nlohmann::json to_json(const Matrix& m);
nlohmann::json to_json(const Vector& v);

/// Throws InvalidArgument naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace bilevel
