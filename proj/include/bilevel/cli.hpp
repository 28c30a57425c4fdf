#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bilevel/escape.hpp"
#include "bilevel/problem_io.hpp"

namespace bilevel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "BILEVEL_ESCAPE_OUTPUT_DIR";

enum class Algorithm { PerturbedGdmax, PerturbedAid, IneonProbe, StocbioIneon };

const char* to_string(Algorithm a);

enum class DepthRule { Order, Explicit };

struct SweepSpec {
  std::string axis;  // "epsilon" or "kappa"
  std::vector<double> values;
};

/// Parsed experiment file. Optional fields fall back to theory-derived values.
struct ExperimentConfig {
  nlohmann::json problem;
  Algorithm algorithm = Algorithm::PerturbedAid;
  std::optional<double> epsilon;  // defaults to the planted epsilon_target
  double iota = 2.0;
  double delta = 0.1;
  double rho_floor = kDefaultRhoFloor;
  double c_order = 1.0;
  long max_iters = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "out";
  int snapshot_stride = 0;
  bool certified_exit = true;
  DepthRule depths = DepthRule::Order;
  std::string start = "default";  // "default", "saddle", "minimum", "origin"
  std::optional<Vector> x0;
  bool exact_inner_init = false;
  nlohmann::json stoc = nlohmann::json::object();
  std::optional<SweepSpec> sweep;
};

/// Throws InvalidArgument (or InvalidIota) on any schema violation, including unknown keys.
/// Relative problem_file paths resolve against base_dir.
ExperimentConfig parse_experiment(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_experiment(const std::string& path);

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_verify_constants(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::string& config_path, std::ostream& out, std::ostream& err);

}  // namespace bilevel
