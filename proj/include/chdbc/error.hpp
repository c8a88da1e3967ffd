#pragma once

#include <stdexcept>
#include <string>

namespace chdbc {

enum class ErrorCode {
  NonzeroMean,
  OutOfDomain,
  NoConvergence,
  Solver,
  DegenerateWeight,
  NewtonDiverged,
  ActiveSetCycle,
  Parse,
  IncompatibleInitialData,
  InadmissiblePerturbation,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable code; the CLI maps codes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonzeroMean: return "ERR_NONZERO_MEAN";
    case ErrorCode::OutOfDomain: return "ERR_OUT_OF_DOMAIN";
    case ErrorCode::NoConvergence: return "ERR_NO_CONVERGENCE";
    case ErrorCode::Solver: return "ERR_SOLVER";
    case ErrorCode::DegenerateWeight: return "ERR_DEGENERATE_WEIGHT";
    case ErrorCode::NewtonDiverged: return "ERR_NEWTON_DIVERGED";
    case ErrorCode::ActiveSetCycle: return "ERR_ACTIVE_SET_CYCLE";
    case ErrorCode::Parse: return "ERR_PARSE";
    case ErrorCode::IncompatibleInitialData: return "ERR_INCOMPATIBLE_INITIAL_DATA";
    case ErrorCode::InadmissiblePerturbation: return "ERR_INADMISSIBLE_PERTURBATION";
    case ErrorCode::InvalidArgument: return "ERR_INVALID_ARGUMENT";
    case ErrorCode::Io: return "ERR_IO";
  }
  return "ERR_UNKNOWN";
}

}  // namespace chdbc
