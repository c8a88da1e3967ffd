#pragma once

// Sectioned key = value run configuration.
//
//   [grid]         Lx = 6.283185307179586   Ly = 1   nx = 32   ny = 33
//   [potential]    bulk = quartic   boundary = quartic   rho = 1   c0 = 2
//   [perturbation] pi = linear:-1   pi_gamma = (same as pi)
//   [initial]      u0 = 0                      (expression in x, y)
//   [constraint]   w_gamma = uniform   k_lo = -inf   k_hi = inf
//   [forcing]      f = 0   f_gamma = 0         (expressions in x, y, t)   a7 = true
//   [time]         dt = 1e-3   T = 0.1   eps_schedule = 1e-2   tau = 1
//   [solver]       newton_tol = 1e-10   newton_max_iter = 50   tol_kkt = 1e-8
//                  tol_mean = 1e-10   max_halvings = 5   locate_events = true   seed = 12345
//   [output]       checkpoint_every = 0   store_every = 1
//   [study]        tau_schedule = 1,0.1,0.01,0   delta = 1e-3
//
// w_gamma is `uniform`, `bottom_only` or an expression in x and y (y = 0 on
// the bottom row, Ly on the top). In f_gamma, y likewise marks the row.
// Lines starting with # or ; are comments.

#include <map>
#include <string>
#include <vector>

#include "chdbc/stepper.hpp"

namespace chdbc {

struct StudyOptions {
  std::vector<double> tau_schedule{1.0, 0.1, 0.01, 0.0};
  double delta = 1e-3;
};

struct LoadedConfig {
  RunConfig run;
  StudyOptions study;
  /// Effective section.key -> value after overrides.
  std::map<std::string, std::string> values;
  /// Overrides as given, in order.
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// Every recognized section.key with its default.
const std::map<std::string, std::string>& config_defaults();

/// Parses text; `overrides` (section.key, value) take precedence. Throws
/// ERR_PARSE (with line number), ERR_DEGENERATE_WEIGHT, ERR_INVALID_ARGUMENT
/// or ERR_INCOMPATIBLE_INITIAL_DATA.
LoadedConfig parse_config_text(const std::string& text,
                               const std::vector<std::pair<std::string, std::string>>& overrides = {});
LoadedConfig parse_config(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// "section.key=value" -> pair. Throws ERR_PARSE.
std::pair<std::string, std::string> parse_override(const std::string& arg);

std::vector<double> parse_number_list(const std::string& text);

}  // namespace chdbc
