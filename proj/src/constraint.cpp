#include "chdbc/constraint.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "chdbc/error.hpp"

namespace chdbc {

ConstraintSpec ConstraintSpec::make(BoundaryField w, double k_lo, double k_hi, double m0) {
  for (double x : w.values)
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorCode::DegenerateWeight, "w_gamma must be finite and >= 0");
  if (k_lo > k_hi) {
    std::ostringstream msg;
    msg << "k_lo = " << k_lo << " exceeds k_hi = " << k_hi;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  ConstraintSpec C;
  C.sigma0 = integrate_boundary(w);
  if (!(C.sigma0 > 0.0)) throw Error(ErrorCode::DegenerateWeight, "sigma0 = int_G w_gamma must be positive");
  C.w_gamma = std::move(w);
  C.k_lo = k_lo;
  C.k_hi = k_hi;
  C.m0 = m0;
  C.h_lo = k_lo - m0 * C.sigma0;
  C.h_hi = k_hi - m0 * C.sigma0;
  return C;
}

BoundaryField weight_from_preset(const StripGrid& g, const std::string& name) {
  if (name == "uniform") return BoundaryField(g, 1.0);
  if (name == "bottom_only") return BoundaryField::from_function(g, [](double, int side) { return side == 0 ? 1.0 : 0.0; });
  throw Error(ErrorCode::Parse, "unknown weight preset '" + name + "'");
}

const char* to_string(ActiveBound a) {
  switch (a) {
    case ActiveBound::Lower: return "lower";
    case ActiveBound::Upper: return "upper";
    default: return "inactive";
  }
}

double boundary_mass(const BoundaryField& v_gamma, const ConstraintSpec& C) { return inner_boundary(C.w_gamma, v_gamma); }

bool admissible_mass(double h, const ConstraintSpec& C, double tol) { return h >= C.h_lo - tol && h <= C.h_hi + tol; }

bool admissible(const BoundaryField& v_gamma, const ConstraintSpec& C, double tol) {
  return admissible_mass(boundary_mass(v_gamma, C), C, tol);
}

double clamp_target(double h, const ConstraintSpec& C) { return std::min(std::max(h, C.h_lo), C.h_hi); }

KktReport kkt_check(double h, double lambda, const ConstraintSpec& C, double tol) {
  KktReport rep;
  auto fail = [&](double mag, std::string why) {
    if (mag > rep.violation) {
      rep.violation = mag;
      rep.reason = std::move(why);
    }
    rep.pass = false;
  };
  if (h < C.h_lo - tol) fail(C.h_lo - h, "h below h_lo");
  if (h > C.h_hi + tol) fail(h - C.h_hi, "h above h_hi");
  if (!rep.pass) return rep;

  const bool at_lo = std::abs(h - C.h_lo) <= tol;
  const bool at_hi = std::abs(h - C.h_hi) <= tol;
  if (!(at_lo && at_hi)) {
    if (at_hi && lambda < -tol) fail(-lambda, "negative lambda at the upper bound");
    if (at_lo && lambda > tol) fail(lambda, "positive lambda at the lower bound");
    if (!at_lo && !at_hi && std::abs(lambda) > tol) fail(std::abs(lambda), "nonzero lambda with h interior");
  }
  if (!rep.pass) return rep;
  for (double target : {C.h_lo, C.h_hi}) {
    if (!std::isfinite(target)) continue;
    const double vi = lambda * (h - target);
    if (vi < -tol * (1.0 + std::abs(lambda))) fail(-vi, "variational inequality violated");
  }
  return rep;
}

CoupledField build_zc(const StripGrid& g, const ConstraintSpec& C) {
  if (!(C.sigma0 > 0.0)) throw Error(ErrorCode::DegenerateWeight, "sigma0 must be positive");
  const double a = 1.0 / C.sigma0;
  const BulkField b = BulkField::from_function(
      g, [&](double, double y) { return a * std::cos(2.0 * std::numbers::pi * y / g.Ly); });
  return CoupledField(b, BoundaryField(g, a));
}

CoupledField nonlinear_terms(const CoupledField& v, const GraphPair& pair, const PerturbationSpec& P, double eps,
                             const CoupledField& forcing) {
  CoupledField q(v.grid());
  const double m0 = P.m0;
  for (std::size_t k = 0; k < q.bulk.size(); ++k) {
    const double u = v.bulk.values[k] + m0;
    q.bulk.values[k] = pair.yosida_bulk(eps, u) + P.pi(u) - forcing.bulk.values[k];
  }
  for (std::size_t k = 0; k < q.boundary.size(); ++k) {
    const double u = v.boundary.values[k] + m0;
    q.boundary.values[k] =
        eps * v.boundary.values[k] + pair.yosida_boundary(eps, u) + P.pi_gamma(u) - forcing.boundary.values[k];
  }
  return q;
}

double compute_omega(const CoupledField& dv_dt, const CoupledField& q, double lambda, const ConstraintSpec& C) {
  const StripGrid& g = q.grid();
  BoundaryField s(g);
  for (std::size_t k = 0; k < s.size(); ++k)
    s.values[k] = dv_dt.boundary.values[k] + q.boundary.values[k] + lambda * C.w_gamma.values[k];
  return (integrate_bulk(q.bulk) + integrate_boundary(s)) / g.measure();
}

BulkField chemical_potential(const NeumannSolver& solver, const BulkField& dv_dt, double omega) {
  BulkField mu = solver.solve(project_P0(dv_dt));
  for (double& x : mu.values) x = omega - x;
  return mu;
}

double lambda_from_formula(const NeumannSolver& solver, const CoupledField& v, const CoupledField& dv_dt,
                           const CoupledField& q, double tau, const CoupledField& zc, const ConstraintSpec& C) {
  const StripGrid& g = v.grid();
  BulkField integrand = solver.solve(project_P0(dv_dt.bulk));
  for (std::size_t k = 0; k < integrand.size(); ++k) integrand.values[k] += tau * dv_dt.bulk.values[k] + q.bulk.values[k];
  BoundaryField s(g);
  for (std::size_t k = 0; k < s.size(); ++k) s.values[k] = dv_dt.boundary.values[k] + q.boundary.values[k];
  return -inner_bulk(integrand, zc.bulk) - inner_grad_bulk(v.bulk, zc.bulk) - integrate_boundary(s) / C.sigma0;
}

}  // namespace chdbc
