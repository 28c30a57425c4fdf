#pragma once

#include <stdexcept>
#include <string>

namespace bilevel {

// Root of every error raised by the library. Callers that only care about
// "numerical failure" vs "bad input" can catch NumericalError / InvalidArgument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// An iterative method hit its iteration cap. `residual` is the best value reached.
class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, double residual)
      : NumericalError(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

class SingularSystem : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotPositiveDefinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NumericalBlowup : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConstructionFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InvalidIota : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DegenerateFit : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class MisalignedSeries : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace bilevel
