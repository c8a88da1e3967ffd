#include "chdbc/operators.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "chdbc/error.hpp"
#include "chdbc/kernels.hpp"

namespace chdbc {

namespace {

void require_zero_mean(const BulkField& z, double tol_mean, const char* who) {
  const double m = mean_bulk(z);
  if (std::abs(m) > tol_mean) {
    std::ostringstream msg;
    msg << who << ": input mean " << m << " exceeds tol_mean " << tol_mean;
    throw Error(ErrorCode::NonzeroMean, msg.str());
  }
}

double checked_potential(const MonotoneGraph& g, double eps, double r) {
  if (eps > 0.0) return g.moreau_envelope(eps, r);
  const double p = g.potential(r);
  if (!std::isfinite(p)) {
    std::ostringstream msg;
    msg << "value " << r << " outside the domain of " << g.name();
    throw Error(ErrorCode::OutOfDomain, msg.str());
  }
  return p;
}

}  // namespace

PerturbationSpec perturbation_from_preset(const std::string& spec, double m0) {
  PerturbationSpec P;
  P.m0 = m0;
  P.name = spec;
  double c = 0.0;
  bool sine = false;
  if (spec == "zero") {
    c = 0.0;
  } else if (spec.rfind("linear:", 0) == 0 || spec.rfind("sine:", 0) == 0) {
    sine = spec[0] == 's';
    try {
      c = std::stod(spec.substr(spec.find(':') + 1));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "bad perturbation preset '" + spec + "'");
    }
  } else {
    throw Error(ErrorCode::Parse, "unknown perturbation preset '" + spec + "'");
  }
  if (sine) {
    P.pi = [c](double r) { return c * std::sin(r); };
    P.dpi = [c](double r) { return c * std::cos(r); };
    P.pi_hat = [c](double r) { return c * (1.0 - std::cos(r)); };
  } else {
    P.pi = [c](double r) { return c * r; };
    P.dpi = [c](double) { return c; };
    P.pi_hat = [c](double r) { return 0.5 * c * r * r; };
  }
  P.pi_gamma = P.pi;
  P.dpi_gamma = P.dpi;
  P.pi_gamma_hat = P.pi_hat;
  P.L = P.L_gamma = std::abs(c);
  return P;
}

bool check_lipschitz(const PerturbationSpec& P, double range) {
  const int n = 401;
  for (int k = 0; k + 1 < n; ++k) {
    const double a = -range + 2.0 * range * k / (n - 1);
    const double b = -range + 2.0 * range * (k + 1) / (n - 1);
    if (std::abs(P.pi(a) - P.pi(b)) > P.L * (b - a) + 1e-12) return false;
    if (std::abs(P.pi_gamma(a) - P.pi_gamma(b)) > P.L_gamma * (b - a) + 1e-12) return false;
  }
  return true;
}

NeumannSolver::NeumannSolver(const StripGrid& g) : grid_(g) {
  const int nx = g.nx;
  basis_.assign(static_cast<std::size_t>(nx) * nx, 0.0);
  eig_.assign(nx, 0.0);
  const double dx2 = g.dx() * g.dx();
  const double c0 = 1.0 / std::sqrt(static_cast<double>(nx));
  const double c1 = std::sqrt(2.0 / nx);
  auto set_row = [&](int k, int m, auto&& fn) {
    for (int i = 0; i < nx; ++i) basis_[static_cast<std::size_t>(k) * nx + i] = fn(i);
    eig_[k] = (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * m / nx)) / dx2;
  };
  set_row(0, 0, [&](int) { return c0; });
  int k = 1;
  for (int m = 1; m < nx / 2; ++m) {
    set_row(k++, m, [&](int i) { return c1 * std::cos(2.0 * std::numbers::pi * m * i / nx); });
    set_row(k++, m, [&](int i) { return c1 * std::sin(2.0 * std::numbers::pi * m * i / nx); });
  }
  set_row(k, nx / 2, [&](int i) { return (i % 2 == 0 ? c0 : -c0); });
}

BulkField NeumannSolver::solve(const BulkField& z, double tol, double tol_mean) const {
  if (!(z.grid == grid_)) throw Error(ErrorCode::InvalidArgument, "NeumannSolver used on a different grid");
  require_zero_mean(z, tol_mean, "invert_F");
  const int nx = grid_.nx;
  const int ny = grid_.ny;
  const double dy2 = grid_.dy() * grid_.dy();

  // forward transform: coef[j*nx + k]
  std::vector<double> coef(grid_.bulk_size(), 0.0);
  for (int j = 0; j < ny; ++j)
    for (int k = 0; k < nx; ++k) {
      double s = 0.0;
      for (int i = 0; i < nx; ++i) s += basis_[static_cast<std::size_t>(k) * nx + i] * z(i, j);
      coef[static_cast<std::size_t>(j) * nx + k] = s;
    }

  std::vector<double> rhs(ny), sol(ny), cp(ny), dp(ny);
  for (int k = 0; k < nx; ++k) {
    for (int j = 0; j < ny; ++j) rhs[j] = coef[static_cast<std::size_t>(j) * nx + k];
    if (k == 0) {
      sol[0] = 0.0;
      sol[1] = -0.5 * dy2 * rhs[0];
      for (int j = 1; j + 1 < ny; ++j) sol[j + 1] = 2.0 * sol[j] - sol[j - 1] - dy2 * rhs[j];
    } else {
      // rows scaled by dy^2: sub a_j, diag b_j, super c_j
      const double lam = eig_[k] * dy2;
      auto sub = [&](int j) { return j == ny - 1 ? -2.0 : -1.0; };
      auto sup = [&](int j) { return j == 0 ? -2.0 : -1.0; };
      const double diag = 2.0 + lam;
      cp[0] = sup(0) / diag;
      dp[0] = dy2 * rhs[0] / diag;
      for (int j = 1; j < ny; ++j) {
        const double m = diag - sub(j) * cp[j - 1];
        cp[j] = (j + 1 < ny) ? sup(j) / m : 0.0;
        dp[j] = (dy2 * rhs[j] - sub(j) * dp[j - 1]) / m;
      }
      sol[ny - 1] = dp[ny - 1];
      for (int j = ny - 2; j >= 0; --j) sol[j] = dp[j] - cp[j] * sol[j + 1];
    }
    for (int j = 0; j < ny; ++j) coef[static_cast<std::size_t>(j) * nx + k] = sol[j];
  }

  BulkField y(grid_);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int k = 0; k < nx; ++k) s += basis_[static_cast<std::size_t>(k) * nx + i] * coef[static_cast<std::size_t>(j) * nx + k];
      y(i, j) = s;
    }
  const double m = mean_bulk(y);
  for (double& v : y.values) v -= m;

  const BulkField res = apply_F(y, std::numeric_limits<double>::infinity()) - z;
  const double rn = norm_H0(res);
  const double zn = norm_H0(z);
  if (rn > tol * zn + 1e-300) {
    std::ostringstream msg;
    msg << "Neumann solve residual " << rn << " exceeds " << tol << " * " << zn;
    throw Error(ErrorCode::Solver, msg.str());
  }
  return y;
}

BulkField apply_F(const BulkField& y, double tol_mean) {
  require_zero_mean(y, tol_mean, "apply_F");
  BulkField out = laplace_bulk(y);
  for (double& v : out.values) v = -v;
  return out;
}

BulkField invert_F(const BulkField& z, double tol, double tol_mean) {
  return NeumannSolver(z.grid).solve(z, tol, tol_mean);
}

double norm_V0_dual(const BulkField& z, double tol_mean) { return norm_V0(invert_F(z, 1e-10, tol_mean)); }

double inner_V0_dual(const BulkField& y, const BulkField& z, double tol_mean) {
  const NeumannSolver s(y.grid);
  return inner_grad_bulk(s.solve(y, 1e-10, tol_mean), s.solve(z, 1e-10, tol_mean));
}

BulkField project_P0(const BulkField& z) {
  BulkField out = z;
  const double m = mean_bulk(z);
  for (double& v : out.values) v -= m;
  return out;
}

CoupledField project_P(const CoupledField& z) {
  CoupledField out = z;
  const double m = mean_bulk(z.bulk);
  for (double& v : out.bulk.values) v -= m;
  for (double& v : out.boundary.values) v -= m;
  return out;
}

CoupledField apply_A_tau(const CoupledField& z, double tau, double tol) {
  BulkField b = invert_F(z.bulk, tol);
  for (std::size_t k = 0; k < b.values.size(); ++k) b.values[k] += tau * z.bulk.values[k];
  return CoupledField(std::move(b), z.boundary);
}

CoupledField apply_Pi0(const CoupledField& z, const PerturbationSpec& P) {
  CoupledField out(z.grid());
  kernels::map(z.bulk.values, out.bulk.values, [&](double v) { return P.pi(v + P.m0); });
  kernels::map(z.boundary.values, out.boundary.values, [&](double v) { return P.pi_gamma(v + P.m0); });
  return out;
}

CoupledField apply_dphi_eps(const CoupledField& z, const GraphPair& pair, double eps, double m0) {
  const StripGrid& g = z.grid();
  const BoundaryField dn = normal_derivative(z.bulk);
  CoupledField out(g);
  out.bulk = laplace_bulk(z.bulk, dn);
  std::vector<double> beta(g.bulk_size());
  kernels::yosida_map(pair.bulk, eps, m0, z.bulk.values, beta);
  for (std::size_t k = 0; k < beta.size(); ++k) out.bulk.values[k] = -out.bulk.values[k] + beta[k];

  const BoundaryField lb = laplace_beltrami(z.boundary);
  std::vector<double> beta_g(g.boundary_size());
  kernels::yosida_map(pair.boundary, eps * pair.rho, m0, z.boundary.values, beta_g);
  for (std::size_t k = 0; k < beta_g.size(); ++k)
    out.boundary.values[k] = dn.values[k] - lb.values[k] + beta_g[k] + eps * z.boundary.values[k];
  return out;
}

double pairing(const CoupledField& a, const CoupledField& b) {
  return inner_bulk(a.bulk, b.bulk) + inner_boundary(a.boundary, b.boundary);
}

double dphi_eps_pairing(const CoupledField& z, const CoupledField& zbar, const GraphPair& pair, double eps,
                        double m0) {
  const StripGrid& g = z.grid();
  BulkField beta(g);
  for (std::size_t k = 0; k < beta.size(); ++k) beta.values[k] = pair.yosida_bulk(eps, z.bulk.values[k] + m0);
  BoundaryField beta_g(g);
  for (std::size_t k = 0; k < beta_g.size(); ++k)
    beta_g.values[k] = pair.yosida_boundary(eps, z.boundary.values[k] + m0) + eps * z.boundary.values[k];
  return inner_grad_bulk(z.bulk, zbar.bulk) + inner_bulk(beta, zbar.bulk) +
         inner_grad_boundary(z.boundary, zbar.boundary) + inner_boundary(beta_g, zbar.boundary);
}

double energy_phi(const CoupledField& z, const GraphPair& pair, double eps, double m0) {
  const StripGrid& g = z.grid();
  BulkField pb(g);
  for (std::size_t k = 0; k < pb.size(); ++k) pb.values[k] = checked_potential(pair.bulk, eps, z.bulk.values[k] + m0);
  BoundaryField pg(g);
  for (std::size_t k = 0; k < pg.size(); ++k)
    pg.values[k] = checked_potential(pair.boundary, eps * pair.rho, z.boundary.values[k] + m0);
  double e = 0.5 * inner_grad_bulk(z.bulk, z.bulk) + integrate_bulk(pb) +
             0.5 * inner_grad_boundary(z.boundary, z.boundary) + integrate_boundary(pg);
  if (eps > 0.0) e += 0.5 * eps * inner_boundary(z.boundary, z.boundary);
  return e;
}

double energy_total(const CoupledField& z, const GraphPair& pair, double eps, const PerturbationSpec& P) {
  const StripGrid& g = z.grid();
  BulkField pb(g);
  for (std::size_t k = 0; k < pb.size(); ++k) pb.values[k] = P.pi_hat(z.bulk.values[k] + P.m0);
  BoundaryField pg(g);
  for (std::size_t k = 0; k < pg.size(); ++k) pg.values[k] = P.pi_gamma_hat(z.boundary.values[k] + P.m0);
  return energy_phi(z, pair, eps, P.m0) + integrate_bulk(pb) + integrate_boundary(pg);
}

}  // namespace chdbc
