#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skipfree {

enum class ErrorCode {
  // model construction and parsing
  ParseError,
  NonSkipFree,
  ZeroDownRate,
  NegativeRate,
  TrapViolation,
  HorizonExceeded,
  // scale functions
  ScaleOverflow,
  OrderingViolation,
  // spectral layer
  NegativeQTooDeep,
  NonConvergent,
  ParameterViolation,
  BracketFailure,
  NonMonotoneSchedule,
  NegativeWeight,
  WindowNonConvergent,
  // simulation
  ConfigError,
  InsufficientData,
  InsufficientSurvivors,
  // oracles
  SingularSystem,
  IterationDivergence,
  OverflowGuard,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable error class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Model/parse/validation failures map to exit code 1, numeric ones to 2.
bool is_validation_error(ErrorCode code);

}  // namespace skipfree
