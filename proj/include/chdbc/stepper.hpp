#pragma once

// Backward-Euler integration of the regularized flow in mixed form
//
//   M (v - v^n)/dt + K mu = 0
//   -M mu + M (tau (v - v^n)/dt + beta_eps(v+m0) + pi(v+m0) - f) + K v
//     + T' [ M_G ((v_G - v_G^n)/dt + beta_G,eps(v_G+m0) + eps v_G + pi_G(v_G+m0) - f_G + lambda w) + K_G v_G ] = 0
//   int_G w v_G = bound          (only while the constraint is active)
//
// with M, K the bulk mass/stiffness matrices, M_G, K_G their boundary
// counterparts and T the trace. mu is the chemical potential; its mean is
// omega and -F^-1((v - v^n)/dt) = mu - omega.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chdbc/constraint.hpp"
#include "chdbc/geometry.hpp"
#include "chdbc/monotone.hpp"
#include "chdbc/operators.hpp"

namespace chdbc {

struct ForcingSpec {
  std::function<double(double x, double y, double t)> f;
  std::function<double(double x, int side, double t)> f_gamma;
  std::string f_text = "0";
  std::string f_gamma_text = "0";
  /// User-declared regularity class of f, required for tau = 0 runs.
  bool a7 = true;

  bool is_zero() const { return !f && !f_gamma; }
  CoupledField evaluate(const StripGrid& g, double t) const;
};

struct SolverOptions {
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  double tol_kkt = 1e-8;
  double tol_mean = kDefaultTolMean;
  int max_halvings = 5;
  /// Split a step at the instant the boundary mass reaches a bound.
  bool locate_events = true;
  std::uint64_t seed = 12345;
};

struct OutputPolicy {
  int checkpoint_every = 0;  // 0 disables checkpoints
  int store_every = 1;
};

struct RunConfig {
  StripGrid grid;
  GraphPair pair{MonotoneGraph::power_odd(3), MonotoneGraph::power_odd(3)};
  std::string bulk_preset = "quartic";
  std::string boundary_preset = "quartic";
  std::string perturbation_preset = "linear:-1";
  std::string perturbation_gamma_preset;  // empty: same as the bulk
  std::string u0_text = "0";
  std::string w_gamma_text = "uniform";
  BulkField u0;
  BoundaryField w_gamma;
  double k_lo = -std::numeric_limits<double>::infinity();
  double k_hi = std::numeric_limits<double>::infinity();
  ForcingSpec forcing;
  double dt = 1e-3;
  double T = 0.1;
  std::vector<double> eps_schedule{1e-2};
  double tau = 1.0;
  SolverOptions solver;
  OutputPolicy output;

  double m0() const { return mean_bulk(u0); }
  PerturbationSpec perturbation() const;
  ConstraintSpec constraint() const { return ConstraintSpec::make(w_gamma, k_lo, k_hi, m0()); }
  /// (u0 - m0, trace).
  CoupledField v0() const;
  double eps() const { return eps_schedule.back(); }
  int steps() const;
};

/// Throws ERR_INCOMPATIBLE_INITIAL_DATA unless h(0) is admissible and the
/// potentials are finite on the initial data.
void check_initial_data(const RunConfig& cfg);

struct SolverState {
  double t = 0.0;
  CoupledField v;
  CoupledField xi;
  BulkField mu;
  MultiplierState mult;
  double eps = 0.0;
  double tau = 0.0;
  long step_index = 0;
  double h = 0.0;
};

struct StepInfo {
  int newton_iterations = 0;
  double residual = 0.0;
  int active_set_cycles = 0;
};

struct TrajectoryPoint {
  SolverState state;
  double dt = 0.0;      // size of the substep that produced this state (0 for the initial point)
  bool on_grid = true;  // lands on a multiple of the configured dt
  StepInfo info;
  double energy = 0.0;
};

struct Trajectory {
  double eps = 0.0;
  double tau = 0.0;
  double m0 = 0.0;
  std::vector<TrajectoryPoint> points;

  /// Points on the configured time grid, including t = 0.
  std::vector<const TrajectoryPoint*> grid_points() const;
};

class Stepper {
 public:
  Stepper(const RunConfig& cfg, double eps, double tau);
  ~Stepper();
  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  const ConstraintSpec& constraint() const { return constraint_; }
  const PerturbationSpec& perturbation() const { return pert_; }
  double eps() const { return eps_; }
  double tau() const { return tau_; }

  SolverState initial_state() const;

  /// One backward-Euler step of size dt with the active-set loop; no event
  /// location and no dt halving.
  SolverState advance(const SolverState& s, double dt, StepInfo* info = nullptr);
  /// Solve with the given active mode only (Inactive = lambda 0; Upper/Lower
  /// = mass pinned to that bound, lambda free).
  SolverState solve_mode(const SolverState& s, double dt, ActiveBound mode, StepInfo* info = nullptr);

  /// Full step from s to t_next: event location at constraint activation and
  /// automatic dt halving on Newton failure. Returns the accepted substeps;
  /// the last one lands at t_next.
  std::vector<TrajectoryPoint> step(const SolverState& s, double t_next);

  /// Scaled nonlinear residual of the scheme for the step from -> to, with
  /// the constraint equation included when `to` is active.
  double residual_norm(const SolverState& from, const SolverState& to) const;

  double energy(const CoupledField& v) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  RunConfig cfg_;
  double eps_;
  double tau_;
  PerturbationSpec pert_;
  ConstraintSpec constraint_;

  std::vector<TrajectoryPoint> step_halving(const SolverState& s, double t_next, int level);
  std::vector<TrajectoryPoint> step_events(const SolverState& s, double t_next);
};

/// One configured step from s.
SolverState step(const SolverState& s, const RunConfig& cfg);

struct RunOptions {
  std::optional<double> eps;
  std::optional<double> tau;
  std::function<void(const TrajectoryPoint&)> on_point;
};

/// Runs over [0, T]. Points are passed to on_point as they are accepted, so a
/// failing run has already emitted its partial trajectory when it throws.
Trajectory run(const RunConfig& cfg, const RunOptions& opts = {});

struct ContinuationReport {
  std::vector<double> params;
  std::vector<Trajectory> runs;
  std::vector<double> diff_sup_H0;   // max_t |v_k - v_k+1|_H0 pair
  std::vector<double> diff_L2_V0;    // (int |v_k - v_k+1|^2_V0 pair dt)^1/2
  std::vector<double> diff_xi_L2;    // (int |xi_k - xi_k+1|^2_H0 pair dt)^1/2
  std::vector<double> excursion;     // max over t, nodes of dist(u, [-1, 1]) per run
  std::vector<double> tau_vprime;    // tau |v'|_{L2(0,T;H0)} per run
};

/// Runs the config at each entry of cfg.eps_schedule. Members run
/// concurrently, capped by CHDBC_THREADS.
ContinuationReport continuation_eps(const RunConfig& cfg);
ContinuationReport continuation_tau(const RunConfig& cfg, const std::vector<double>& tau_schedule);

/// Number of concurrent members allowed by CHDBC_THREADS (default: hardware concurrency).
int study_threads();

namespace kernels {

struct ResidualInputs {
  const StripGrid* grid = nullptr;
  const GraphPair* pair = nullptr;
  const PerturbationSpec* pert = nullptr;
  double eps = 0.0;
  double tau = 0.0;
  double dt = 1.0;
  double lambda = 0.0;
  std::span<const double> v, v_prev, mu, f, f_gamma, w;
};

/// Nodewise mass-weighted residuals e1 (flux equation) and e2 (chemical
/// potential equation) of the scheme.
void residual(const ResidualInputs& in, std::span<double> e1, std::span<double> e2);
namespace serial {
void residual(const ResidualInputs& in, std::span<double> e1, std::span<double> e2);
}
}  // namespace kernels

}  // namespace chdbc
