#pragma once

// Linear and nonlinear operators on coupled bulk/boundary fields: the duality
// map F = -Delta_N on zero-mean fields and its inverse, the projections P0 and
// P, the viscosity operator A_tau, the Lipschitz perturbation Pi0 and the
// regularized subdifferential of the free energy.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chdbc/geometry.hpp"
#include "chdbc/monotone.hpp"

namespace chdbc {

struct PerturbationSpec {
  std::string name = "zero";
  std::function<double(double)> pi;
  std::function<double(double)> pi_gamma;
  std::function<double(double)> dpi;
  std::function<double(double)> dpi_gamma;
  /// Antiderivatives vanishing at 0.
  std::function<double(double)> pi_hat;
  std::function<double(double)> pi_gamma_hat;
  double L = 0.0;
  double L_gamma = 0.0;
  double m0 = 0.0;
};

/// `zero`, `linear:c` (pi(r) = c r) or `sine:a` (pi(r) = a sin r); the same
/// function is used on the boundary.
PerturbationSpec perturbation_from_preset(const std::string& spec, double m0 = 0.0);
/// Lipschitz check of pi and pi_gamma on 401 points over [-range, range].
bool check_lipschitz(const PerturbationSpec& P, double range = 10.0);

/// Exact discrete inverse of -Delta_N on zero-mean fields: real Fourier basis
/// in x, one tridiagonal Neumann solve per mode in y. Immutable after
/// construction; concurrent solve() calls are safe.
class NeumannSolver {
 public:
  explicit NeumannSolver(const StripGrid& g);
  const StripGrid& grid() const { return grid_; }
  /// Throws ERR_NONZERO_MEAN or ERR_SOLVER.
  BulkField solve(const BulkField& z, double tol = 1e-10, double tol_mean = kDefaultTolMean) const;

 private:
  StripGrid grid_;
  std::vector<double> basis_;  // nx x nx, row k = k-th orthonormal mode
  std::vector<double> eig_;    // eigenvalue of -D_xx per mode
};

BulkField apply_F(const BulkField& y, double tol_mean = kDefaultTolMean);
BulkField invert_F(const BulkField& z, double tol = 1e-10, double tol_mean = kDefaultTolMean);
double norm_V0_dual(const BulkField& z, double tol_mean = kDefaultTolMean);
/// (y*, z*)_{V0*} = int grad F^-1 y* . grad F^-1 z*.
double inner_V0_dual(const BulkField& y, const BulkField& z, double tol_mean = kDefaultTolMean);

BulkField project_P0(const BulkField& z);
CoupledField project_P(const CoupledField& z);

CoupledField apply_A_tau(const CoupledField& z, double tau, double tol = 1e-10);
CoupledField apply_Pi0(const CoupledField& z, const PerturbationSpec& P);

/// Strong form of the regularized subdifferential. Bulk part uses the ghost
/// rows carrying the field's own normal derivative, which is then added back on
/// the boundary, so the weak pairing below is reproduced exactly.
CoupledField apply_dphi_eps(const CoupledField& z, const GraphPair& pair, double eps, double m0);
/// Weak form: a(z, zb) + (beta_eps(z+m0), zb) + (grad_G z_G, grad_G zb_G)
/// + (beta_G,eps(z_G+m0), zb_G) + eps (z_G, zb_G).
double dphi_eps_pairing(const CoupledField& z, const CoupledField& zbar, const GraphPair& pair, double eps,
                        double m0);
/// Pairing <a, b> = int a b + int_G a_G b_G.
double pairing(const CoupledField& a, const CoupledField& b);

/// eps = 0 uses the true potentials (ERR_OUT_OF_DOMAIN if infinite).
double energy_phi(const CoupledField& z, const GraphPair& pair, double eps, double m0);
/// energy_phi plus int pi_hat(z+m0) + int_G pi_gamma_hat(z_G+m0).
double energy_total(const CoupledField& z, const GraphPair& pair, double eps, const PerturbationSpec& P);

}  // namespace chdbc
