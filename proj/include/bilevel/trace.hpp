#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bilevel/problem.hpp"

namespace bilevel {

enum class RunStatus { MaxIters, LocalMinCertified, NeonReturnedZero };

const char* to_string(RunStatus status);

/// One outer iteration. phi is Phi(x_k) before any perturbation at step k.
struct TraceRecord {
  long k = 0;
  std::string phase;
  double grad_est_norm = 0.0;
  std::optional<double> phi;
  bool perturbed = false;
  long k_perturb = 0;
  std::optional<Vector> x_snapshot;
};

struct NeonEvent {
  long k = 0;
  bool found = false;
  int iterations = 0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::MaxIters;
  Vector x_final;
  std::vector<long> perturbation_iterations;
  std::vector<NeonEvent> neon_events;
  std::uint64_t seed = 0;
  std::optional<std::string> failure;  // message of the error that aborted the run

  /// First k whose record has the given phase, if any.
  std::optional<long> first_phase(const std::string& phase) const;
};

/// Round-trip formatting (17 significant digits).
std::string format_double(double value);

inline constexpr const char* kTraceCsvHeader = "k,phase,grad_est_norm,phi,perturbed,k_perturb,seed";

/// Header plus one row per record; phi is left empty when absent.
void write_trace_csv(std::ostream& out, const RunTrace& trace);

}  // namespace bilevel
