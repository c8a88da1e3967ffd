#include "chdbc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "chdbc/error.hpp"
#include "chdbc/kernels.hpp"

namespace chdbc {

namespace {

void require_same_grid(const StripGrid& a, const StripGrid& b) {
  if (!(a == b)) throw Error(ErrorCode::InvalidArgument, "fields live on different grids");
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

StripGrid::StripGrid(double lx, double ly, int cells_x, int nodes_y) : Lx(lx), Ly(ly), nx(cells_x), ny(nodes_y) {
  if (!(lx > 0.0) || !(ly > 0.0))
    throw Error(ErrorCode::InvalidArgument, "strip lengths must be positive");
  if (cells_x < 4 || cells_x % 2 != 0)
    throw Error(ErrorCode::InvalidArgument, "nx must be even and >= 4, got " + std::to_string(cells_x));
  if (nodes_y < 3) throw Error(ErrorCode::InvalidArgument, "ny must be >= 3, got " + std::to_string(nodes_y));
}

BulkField::BulkField(const StripGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != g.bulk_size()) throw Error(ErrorCode::InvalidArgument, "bulk field size mismatch");
}

BulkField BulkField::from_function(const StripGrid& g, const std::function<double(double, double)>& f) {
  BulkField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out(i, j) = f(g.x(i), g.y(j));
  return out;
}

bool BulkField::finite() const { return all_finite(values); }

BulkField& BulkField::operator+=(const BulkField& o) {
  require_same_grid(grid, o.grid);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
  return *this;
}

BulkField& BulkField::operator-=(const BulkField& o) {
  require_same_grid(grid, o.grid);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
  return *this;
}

BulkField& BulkField::operator*=(double s) {
  for (double& x : values) x *= s;
  return *this;
}

BoundaryField::BoundaryField(const StripGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != g.boundary_size()) throw Error(ErrorCode::InvalidArgument, "boundary field size mismatch");
}

BoundaryField BoundaryField::from_function(const StripGrid& g, const std::function<double(double, int)>& f) {
  BoundaryField out(g);
  for (int side = 0; side < 2; ++side)
    for (int i = 0; i < g.nx; ++i) out(i, side) = f(g.x(i), side);
  return out;
}

bool BoundaryField::finite() const { return all_finite(values); }

BoundaryField& BoundaryField::operator+=(const BoundaryField& o) {
  require_same_grid(grid, o.grid);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
  return *this;
}

BoundaryField& BoundaryField::operator-=(const BoundaryField& o) {
  require_same_grid(grid, o.grid);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
  return *this;
}

BoundaryField& BoundaryField::operator*=(double s) {
  for (double& x : values) x *= s;
  return *this;
}

CoupledField::CoupledField(BulkField b, BoundaryField g) : bulk(std::move(b)), boundary(std::move(g)) {
  require_same_grid(bulk.grid, boundary.grid);
}

CoupledField CoupledField::from_bulk(const BulkField& f) { return CoupledField(f, trace(f)); }

bool CoupledField::trace_compatible(double tol) const {
  const StripGrid& g = grid();
  for (std::size_t k = 0; k < g.boundary_size(); ++k)
    if (std::abs(boundary.values[k] - bulk.values[g.boundary_node(k)]) > tol) return false;
  return true;
}

bool CoupledField::zero_mean(double tol) const { return std::abs(mean_bulk(bulk)) <= tol; }

CoupledField& CoupledField::operator+=(const CoupledField& o) {
  bulk += o.bulk;
  boundary += o.boundary;
  return *this;
}

CoupledField& CoupledField::operator-=(const CoupledField& o) {
  bulk -= o.bulk;
  boundary -= o.boundary;
  return *this;
}

CoupledField& CoupledField::operator*=(double s) {
  bulk *= s;
  boundary *= s;
  return *this;
}

BulkField operator+(BulkField a, const BulkField& b) { return a += b; }
BulkField operator-(BulkField a, const BulkField& b) { return a -= b; }
BulkField operator*(double s, BulkField a) { return a *= s; }
BoundaryField operator+(BoundaryField a, const BoundaryField& b) { return a += b; }
BoundaryField operator-(BoundaryField a, const BoundaryField& b) { return a -= b; }
BoundaryField operator*(double s, BoundaryField a) { return a *= s; }
CoupledField operator+(CoupledField a, const CoupledField& b) { return a += b; }
CoupledField operator-(CoupledField a, const CoupledField& b) { return a -= b; }
CoupledField operator*(double s, CoupledField a) { return a *= s; }

double integrate_bulk(const BulkField& f) {
  const StripGrid& g = f.grid;
  double total = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) row += f(i, j);
    total += g.bulk_weight(j) * row;
  }
  return total;
}

double integrate_boundary_side(const BoundaryField& g, int side) {
  double row = 0.0;
  for (int i = 0; i < g.grid.nx; ++i) row += g(i, side);
  return g.grid.boundary_weight() * row;
}

double integrate_boundary(const BoundaryField& g) {
  return integrate_boundary_side(g, 0) + integrate_boundary_side(g, 1);
}

double mean_bulk(const BulkField& f) { return integrate_bulk(f) / f.grid.measure(); }

double inner_bulk(const BulkField& f, const BulkField& g) {
  require_same_grid(f.grid, g.grid);
  const StripGrid& grid = f.grid;
  double total = 0.0;
  for (int j = 0; j < grid.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < grid.nx; ++i) row += f(i, j) * g(i, j);
    total += grid.bulk_weight(j) * row;
  }
  return total;
}

double inner_boundary(const BoundaryField& f, const BoundaryField& g) {
  require_same_grid(f.grid, g.grid);
  double total = 0.0;
  for (std::size_t k = 0; k < f.values.size(); ++k) total += f.values[k] * g.values[k];
  return f.grid.boundary_weight() * total;
}

BulkGradient grad_bulk(const BulkField& f) {
  const StripGrid& g = f.grid;
  BulkGradient out{g, std::vector<double>(g.bulk_size()), std::vector<double>(static_cast<std::size_t>(g.nx) * (g.ny - 1))};
  const double idx = 1.0 / g.dx();
  const double idy = 1.0 / g.dy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out.gx[g.node(i, j)] = (f(i + 1, j) - f(i, j)) * idx;
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out.gy[g.node(i, j)] = (f(i, j + 1) - f(i, j)) * idy;
  return out;
}

double inner_grad_bulk(const BulkField& f, const BulkField& h) {
  require_same_grid(f.grid, h.grid);
  const StripGrid& g = f.grid;
  const BulkGradient a = grad_bulk(f);
  const BulkGradient b = grad_bulk(h);
  double sx = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) row += a.gx[g.node(i, j)] * b.gx[g.node(i, j)];
    sx += g.bulk_weight(j) * row;
  }
  double sy = 0.0;
  for (std::size_t k = 0; k < a.gy.size(); ++k) sy += a.gy[k] * b.gy[k];
  return sx + g.dx() * g.dy() * sy;
}

BulkField laplace_bulk(const BulkField& f) {
  BulkField out(f.grid);
  kernels::laplace_bulk(f.grid, f.values, {}, out.values);
  return out;
}

BulkField laplace_bulk(const BulkField& f, const BoundaryField& dn) {
  require_same_grid(f.grid, dn.grid);
  BulkField out(f.grid);
  kernels::laplace_bulk(f.grid, f.values, dn.values, out.values);
  return out;
}

BoundaryField grad_boundary(const BoundaryField& g) {
  BoundaryField out(g.grid);
  const double idx = 1.0 / g.grid.dx();
  for (int side = 0; side < 2; ++side)
    for (int i = 0; i < g.grid.nx; ++i) out(i, side) = (g(i + 1, side) - g(i, side)) * idx;
  return out;
}

double inner_grad_boundary(const BoundaryField& f, const BoundaryField& g) {
  return inner_boundary(grad_boundary(f), grad_boundary(g));
}

BoundaryField laplace_beltrami(const BoundaryField& g) {
  BoundaryField out(g.grid);
  kernels::laplace_beltrami(g.grid, g.values, out.values);
  return out;
}

BoundaryField normal_derivative(const BulkField& f) {
  const StripGrid& g = f.grid;
  BoundaryField out(g);
  const double inv = 1.0 / (2.0 * g.dy());
  const int top = g.ny - 1;
  for (int i = 0; i < g.nx; ++i) {
    out(i, 0) = -(-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) * inv;
    out(i, 1) = (3.0 * f(i, top) - 4.0 * f(i, top - 1) + f(i, top - 2)) * inv;
  }
  return out;
}

BoundaryField trace(const BulkField& f) {
  const StripGrid& g = f.grid;
  BoundaryField out(g);
  for (std::size_t k = 0; k < g.boundary_size(); ++k) out.values[k] = f.values[g.boundary_node(k)];
  return out;
}

double norm_H0(const BulkField& z) { return std::sqrt(std::max(0.0, inner_bulk(z, z))); }
double norm_V0(const BulkField& z) { return std::sqrt(std::max(0.0, inner_grad_bulk(z, z))); }
double norm_HGamma(const BoundaryField& z) { return std::sqrt(std::max(0.0, inner_boundary(z, z))); }
double norm_VGamma(const BoundaryField& z) {
  return std::sqrt(std::max(0.0, inner_boundary(z, z) + inner_grad_boundary(z, z)));
}
double norm_H0_pair(const CoupledField& z) {
  return std::sqrt(std::max(0.0, inner_bulk(z.bulk, z.bulk) + inner_boundary(z.boundary, z.boundary)));
}
double norm_V0_pair(const CoupledField& z) {
  const double b = inner_grad_bulk(z.bulk, z.bulk);
  const double s = inner_boundary(z.boundary, z.boundary) + inner_grad_boundary(z.boundary, z.boundary);
  return std::sqrt(std::max(0.0, b + s));
}

double poincare_constant(const StripGrid& g) {
  const double l = std::max(g.Lx, 2.0 * g.Ly) / std::numbers::pi;
  return l * l;
}

}  // namespace chdbc
