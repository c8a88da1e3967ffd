#pragma once

// Post-processing of trajectories: the continuous-dependence experiment,
// recovery of the strong equations from the computed multipliers, and the
// norm inventory monitored across regularization parameters.

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "chdbc/constraint.hpp"
#include "chdbc/operators.hpp"
#include "chdbc/stepper.hpp"

namespace chdbc {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::string> descriptions;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> series(const std::string& name) const;
};

/// Header row plus one line per row, 17 significant digits.
void write_csv(std::ostream& os, const Table& t);
void write_csv_row(std::ostream& os, const std::vector<double>& row);
void write_csv_header(std::ostream& os, const std::vector<std::string>& columns);

// Continuous dependence on the initial data

struct StabilityReport {
  std::vector<double> t;
  std::vector<double> lhs;
  std::vector<double> c_hat;
  double rhs0 = 0.0;
  double c_hat_T = 0.0;
  double c_hat_sup = 0.0;
  double fit_rate = 0.0;       // least-squares c in ln C(t) ~ c t
  double envelope_rate = 0.0;  // max_t ln C(t) / t
  bool reclamped = false;
  bool inadmissible = false;
  std::string note;
};

/// Runs from v0 and v0 + delta * perturbation with the same forcing and
/// compares them in the energy norms of the continuous-dependence estimate.
StabilityReport stability_experiment(const RunConfig& cfg, const CoupledField& perturbation, double delta);

/// Smooth zero-mean trace-compatible perturbation used by the CLI.
CoupledField default_perturbation(const StripGrid& g);

// Recovery of the strong equations

class RecoveryEvaluator {
 public:
  RecoveryEvaluator(const RunConfig& cfg, double eps, double tau);

  CoupledField rate(const SolverState& prev, const SolverState& cur) const;
  CoupledField q(const SolverState& cur) const;
  double omega(const SolverState& prev, const SolverState& cur) const;
  double lambda_formula(const SolverState& prev, const SolverState& cur) const;
  /// Weak variational identity tested with a trace-compatible zero-mean pair;
  /// linear in the test pair.
  double weak(const SolverState& prev, const SolverState& cur, const CoupledField& test) const;
  /// Interior rows of F^-1 v' + tau v' - Delta v + xi + pi(v+m0) - f - omega, H0 norm.
  double interior(const SolverState& prev, const SolverState& cur) const;
  /// dn v + v_G' - Delta_G v_G + q_G + lambda w with the discrete normal flux, H_G norm.
  double boundary(const SolverState& prev, const SolverState& cur) const;

  const NeumannSolver& solver() const { return solver_; }

 private:
  RunConfig cfg_;
  double eps_;
  double tau_;
  PerturbationSpec pert_;
  ConstraintSpec constraint_;
  NeumannSolver solver_;
  CoupledField zc_;

  BulkField bulk_residual(const SolverState& prev, const SolverState& cur, double omega) const;
};

struct RecoveryStep {
  long step = 0;
  double t = 0.0;
  double weak = 0.0;
  double interior = 0.0;
  double boundary = 0.0;
  double lambda_kkt = 0.0;
  double lambda_formula = 0.0;
  double omega_state = 0.0;
  double omega_formula = 0.0;
  ActiveBound active = ActiveBound::Inactive;
};

struct RecoveryReport {
  std::vector<RecoveryStep> steps;
  double max_weak = 0.0;
  double max_interior = 0.0;
  double max_boundary = 0.0;
  /// max |lambda_formula - lambda_kkt| / (1 + |lambda_kkt|) over steps whose
  /// active set matches the previous step.
  double max_lambda_gap = 0.0;
  double tolerance = 0.0;
  std::vector<long> failing_steps;
  bool pass = true;
};

/// Checks every consecutive pair of states; tolerance is 10 * newton_tol.
RecoveryReport recovery_check(const std::vector<SolverState>& states, const RunConfig& cfg, int n_tests = 5);
RecoveryReport recovery_check(const Trajectory& traj, const RunConfig& cfg, int n_tests = 5);

// Per-step series

/// Builds diagnostic rows (core quantities plus the norm inventory) one
/// trajectory point at a time, so it can run while the simulation streams.
class SeriesBuilder {
 public:
  SeriesBuilder(const RunConfig& cfg, double eps, double tau);
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::string>& descriptions() const { return descriptions_; }
  std::vector<double> row(const TrajectoryPoint* prev, const TrajectoryPoint& cur) const;

 private:
  RunConfig cfg_;
  double eps_;
  double tau_;
  PerturbationSpec pert_;
  ConstraintSpec constraint_;
  NeumannSolver solver_;
  std::vector<std::string> columns_;
  std::vector<std::string> descriptions_;
};

Table run_series(const Trajectory& traj, const RunConfig& cfg);
/// Only the norm inventory columns (plus t).
Table bound_monitors(const Trajectory& traj, const RunConfig& cfg);
/// Names of the norm inventory columns.
const std::vector<std::string>& monitor_columns();
/// Run maximum of each monitor plus the L2(0,T) norms of lambda and omega.
std::map<std::string, double> monitor_maxima(const Table& monitors);

}  // namespace chdbc
