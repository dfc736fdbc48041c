#pragma once

#include <stdexcept>
#include <string>

namespace actherm {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, configs, or inadmissible inputs (CLI exit code 1).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Newton / CG failed to reach tolerance within its iteration cap
/// (CLI exit code 2).
class SolverError : public Error {
public:
  SolverError(const std::string& what, double last_residual, int iterations)
      : Error(what), last_residual(last_residual), iterations(iterations) {}
  double last_residual = 0.0;
  int iterations = 0;
};

/// The step violates a structural precondition (c_V/dt + min m <= 0);
/// the caller may halve dt and retry (CLI exit code 2).
class StepSizeError : public Error {
public:
  using Error::Error;
};

/// File / stream problems, malformed snapshots (CLI exit code 3).
class IoError : public Error {
public:
  using Error::Error;
};

/// Entropy monitor called on a state with min theta <= 0. Signals the
/// caller to skip the monitor for this step, not to abort the run.
class NonpositiveTemperatureError : public Error {
public:
  using Error::Error;
};

/// The explicit reference integrator produced a non-finite value
/// (its stability limit was exceeded).
class OracleError : public Error {
public:
  using Error::Error;
};

}  // namespace actherm
