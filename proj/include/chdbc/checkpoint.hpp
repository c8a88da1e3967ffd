#pragma once

// Plain-text solver state snapshots. Values are written with 17 significant
// digits, so a write/read round trip is bit-exact.

#include <string>

#include "chdbc/stepper.hpp"

namespace chdbc {

struct Checkpoint {
  SolverState state;
  double m0 = 0.0;
};

/// Throws ERR_IO.
void write_checkpoint(const std::string& path, const SolverState& s, double m0);
/// Throws ERR_IO or ERR_PARSE.
Checkpoint read_checkpoint(const std::string& path);

}  // namespace chdbc
