#include "skipfree/error.hpp"

namespace skipfree {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonSkipFree: return "NonSkipFree";
    case ErrorCode::ZeroDownRate: return "ZeroDownRate";
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::TrapViolation: return "TrapViolation";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::ScaleOverflow: return "ScaleOverflow";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::NegativeQTooDeep: return "NegativeQTooDeep";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::ParameterViolation: return "ParameterViolation";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::NonMonotoneSchedule: return "NonMonotoneSchedule";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::WindowNonConvergent: return "WindowNonConvergent";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InsufficientSurvivors: return "InsufficientSurvivors";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::IterationDivergence: return "IterationDivergence";
    case ErrorCode::OverflowGuard: return "OverflowGuard";
  }
  return "UnknownError";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::NonSkipFree:
    case ErrorCode::ZeroDownRate:
    case ErrorCode::NegativeRate:
    case ErrorCode::TrapViolation:
    case ErrorCode::HorizonExceeded:
    case ErrorCode::OrderingViolation:
    case ErrorCode::ParameterViolation:
    case ErrorCode::ConfigError:
      return true;
    default:
      return false;
  }
}

}  // namespace skipfree
