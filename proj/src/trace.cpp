#include "bilevel/trace.hpp"

#include <cstdio>

namespace bilevel {

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::MaxIters:
      return "MaxIters";
    case RunStatus::LocalMinCertified:
      return "LocalMinCertified";
    case RunStatus::NeonReturnedZero:
      return "NeonReturnedZero";
  }
  return "unknown";
}

std::optional<long> RunTrace::first_phase(const std::string& phase) const {
  for (const auto& rec : records)
    if (rec.phase == phase) return rec.k;
  return std::nullopt;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& rec : trace.records) {
    out << rec.k << ',' << rec.phase << ',' << format_double(rec.grad_est_norm) << ',';
    if (rec.phi) out << format_double(*rec.phi);
    out << ',' << (rec.perturbed ? 1 : 0) << ',' << rec.k_perturb << ',' << trace.seed << '\n';
  }
}

}  // namespace bilevel
