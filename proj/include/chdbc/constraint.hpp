#pragma once

// Weighted boundary mass constraint h_lo <= int_G w v_G <= h_hi, its
// multiplier lambda, and the a-posteriori multiplier omega (mean chemical
// potential).

#include <string>

#include "chdbc/geometry.hpp"
#include "chdbc/monotone.hpp"
#include "chdbc/operators.hpp"

namespace chdbc {

struct ConstraintSpec {
  BoundaryField w_gamma;
  double k_lo = -1.0;
  double k_hi = 1.0;
  double sigma0 = 0.0;
  double m0 = 0.0;
  double h_lo = 0.0;
  double h_hi = 0.0;

  /// Throws ERR_DEGENERATE_WEIGHT (negative weight or sigma0 <= 0) and
  /// ERR_INVALID_ARGUMENT (k_lo > k_hi). Infinite bounds are allowed.
  static ConstraintSpec make(BoundaryField w, double k_lo, double k_hi, double m0);

  bool equality() const { return h_lo == h_hi; }
};

/// `uniform` (w = 1) or `bottom_only` (w = 1 on the bottom row, 0 on top).
BoundaryField weight_from_preset(const StripGrid& g, const std::string& name);

enum class ActiveBound { Inactive, Lower, Upper };
const char* to_string(ActiveBound a);

struct MultiplierState {
  double lambda = 0.0;
  double omega = 0.0;
  ActiveBound active = ActiveBound::Inactive;
};

double boundary_mass(const BoundaryField& v_gamma, const ConstraintSpec& C);
bool admissible(const BoundaryField& v_gamma, const ConstraintSpec& C, double tol);
bool admissible_mass(double h, const ConstraintSpec& C, double tol);
double clamp_target(double h, const ConstraintSpec& C);

struct KktReport {
  bool pass = true;
  double violation = 0.0;  // magnitude of the worst violated condition
  std::string reason;
};

/// lambda in the subdifferential of the indicator of [h_lo, h_hi] at h, plus
/// the variational inequality lambda (h - k) >= -tol at both finite bounds.
KktReport kkt_check(double h, double lambda, const ConstraintSpec& C, double tol);

/// Trace-compatible pair with zero bulk mean and constant trace 1/sigma0.
CoupledField build_zc(const StripGrid& g, const ConstraintSpec& C);

/// q = beta_eps(v+m0) + pi(v+m0) - f and
/// q_G = eps v_G + beta_G,eps(v_G+m0) + pi_G(v_G+m0) - f_G.
CoupledField nonlinear_terms(const CoupledField& v, const GraphPair& pair, const PerturbationSpec& P, double eps,
                             const CoupledField& forcing);

/// omega = (1/|Omega|) { int q + int_G (v_G' + q_G + lambda w) }.
double compute_omega(const CoupledField& dv_dt, const CoupledField& q, double lambda, const ConstraintSpec& C);

/// mu = -F^-1(v') + omega.
BulkField chemical_potential(const NeumannSolver& solver, const BulkField& dv_dt, double omega);

/// lambda = -int (F^-1 v' + tau v' + q) z_c - int grad v . grad z_c
///          - (1/sigma0) int_G (v_G' + q_G).
double lambda_from_formula(const NeumannSolver& solver, const CoupledField& v, const CoupledField& dv_dt,
                           const CoupledField& q, double tau, const CoupledField& zc, const ConstraintSpec& C);

}  // namespace chdbc
