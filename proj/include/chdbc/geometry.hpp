#pragma once

// Discrete calculus on the periodic strip (0,Lx) x (0,Ly).
//
// Nodes sit at x_i = i*dx (i = 0..nx-1, periodic) and y_j = j*dy (j = 0..ny-1).
// The boundary consists of the two rows j = 0 (side 0) and j = ny-1 (side 1).
// Bulk quadrature is periodic-rectangle in x times trapezoid in y; boundary
// quadrature is the periodic rectangle rule on each row. The Dirichlet form is
// assembled from edge differences, and every Laplacian below is the operator
// induced by that form, so the discrete Green identity holds to round-off.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace chdbc {

inline constexpr double kDefaultTolMean = 1e-10;

struct StripGrid {
  double Lx = 1.0;
  double Ly = 1.0;
  int nx = 4;
  int ny = 3;

  StripGrid() = default;
  /// Throws ERR_INVALID_ARGUMENT unless nx >= 4 is even, ny >= 3 and lengths are positive.
  StripGrid(double lx, double ly, int cells_x, int nodes_y);

  double dx() const { return Lx / nx; }
  double dy() const { return Ly / (ny - 1); }
  std::size_t bulk_size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t boundary_size() const { return 2 * static_cast<std::size_t>(nx); }

  int wrap(int i) const { return ((i % nx) + nx) % nx; }
  std::size_t node(int i, int j) const { return static_cast<std::size_t>(j) * nx + wrap(i); }
  /// Bulk node index of boundary node k (side 0 = bottom row, side 1 = top row).
  std::size_t boundary_node(std::size_t k) const {
    const int side = static_cast<int>(k) / nx;
    const int i = static_cast<int>(k) % nx;
    return node(i, side == 0 ? 0 : ny - 1);
  }

  double x(int i) const { return i * dx(); }
  double y(int j) const { return j * dy(); }
  double side_y(int side) const { return side == 0 ? 0.0 : Ly; }

  /// Quadrature weight of bulk row j.
  double bulk_weight(int j) const { return (j == 0 || j == ny - 1) ? 0.5 * dx() * dy() : dx() * dy(); }
  double boundary_weight() const { return dx(); }

  double measure() const { return Lx * Ly; }
  double boundary_measure() const { return 2.0 * Lx; }

  bool operator==(const StripGrid&) const = default;
};

struct BulkField {
  StripGrid grid;
  std::vector<double> values;

  BulkField() = default;
  explicit BulkField(const StripGrid& g, double fill = 0.0) : grid(g), values(g.bulk_size(), fill) {}
  BulkField(const StripGrid& g, std::vector<double> v);

  static BulkField from_function(const StripGrid& g, const std::function<double(double, double)>& f);

  double& operator()(int i, int j) { return values[grid.node(i, j)]; }
  double operator()(int i, int j) const { return values[grid.node(i, j)]; }
  std::size_t size() const { return values.size(); }
  bool finite() const;

  BulkField& operator+=(const BulkField& o);
  BulkField& operator-=(const BulkField& o);
  BulkField& operator*=(double s);
};

struct BoundaryField {
  StripGrid grid;
  std::vector<double> values;

  BoundaryField() = default;
  explicit BoundaryField(const StripGrid& g, double fill = 0.0) : grid(g), values(g.boundary_size(), fill) {}
  BoundaryField(const StripGrid& g, std::vector<double> v);

  /// f(x, side) with side 0 = bottom, 1 = top.
  static BoundaryField from_function(const StripGrid& g, const std::function<double(double, int)>& f);

  double& operator()(int i, int side) { return values[static_cast<std::size_t>(side) * grid.nx + grid.wrap(i)]; }
  double operator()(int i, int side) const { return values[static_cast<std::size_t>(side) * grid.nx + grid.wrap(i)]; }
  std::size_t size() const { return values.size(); }
  bool finite() const;

  BoundaryField& operator+=(const BoundaryField& o);
  BoundaryField& operator-=(const BoundaryField& o);
  BoundaryField& operator*=(double s);
};

/// A pair (bulk, boundary). When it represents an element of the trace-compatible
/// space the boundary values equal the bulk rows j = 0 and j = ny-1 exactly.
struct CoupledField {
  BulkField bulk;
  BoundaryField boundary;

  CoupledField() = default;
  CoupledField(BulkField b, BoundaryField g);
  explicit CoupledField(const StripGrid& g) : bulk(g), boundary(g) {}

  /// The trace-compatible pair (f, f|_Gamma).
  static CoupledField from_bulk(const BulkField& f);

  const StripGrid& grid() const { return bulk.grid; }
  bool trace_compatible(double tol = 0.0) const;
  bool zero_mean(double tol = kDefaultTolMean) const;

  CoupledField& operator+=(const CoupledField& o);
  CoupledField& operator-=(const CoupledField& o);
  CoupledField& operator*=(double s);
};

BulkField operator+(BulkField a, const BulkField& b);
BulkField operator-(BulkField a, const BulkField& b);
BulkField operator*(double s, BulkField a);
BoundaryField operator+(BoundaryField a, const BoundaryField& b);
BoundaryField operator-(BoundaryField a, const BoundaryField& b);
BoundaryField operator*(double s, BoundaryField a);
CoupledField operator+(CoupledField a, const CoupledField& b);
CoupledField operator-(CoupledField a, const CoupledField& b);
CoupledField operator*(double s, CoupledField a);

/// Edge differences: gx on x-edges (i+1/2, j), gy on y-edges (i, j+1/2).
struct BulkGradient {
  StripGrid grid;
  std::vector<double> gx;  // nx * ny
  std::vector<double> gy;  // nx * (ny - 1)
};

// Quadrature

double integrate_bulk(const BulkField& f);
double integrate_boundary(const BoundaryField& g);
/// Integral over the single row `side`.
double integrate_boundary_side(const BoundaryField& g, int side);
double mean_bulk(const BulkField& f);
double inner_bulk(const BulkField& f, const BulkField& g);
double inner_boundary(const BoundaryField& f, const BoundaryField& g);

// Differential operators

BulkGradient grad_bulk(const BulkField& f);
/// Discrete Dirichlet form, equal to the quadrature of grad f . grad g.
double inner_grad_bulk(const BulkField& f, const BulkField& g);
/// Five-point Laplacian; boundary rows use ghost values matching a zero normal derivative.
BulkField laplace_bulk(const BulkField& f);
/// As above with a prescribed outward normal derivative on the boundary rows.
BulkField laplace_bulk(const BulkField& f, const BoundaryField& normal_derivative);

/// Forward differences along each boundary circle, stored at the left node of each edge.
BoundaryField grad_boundary(const BoundaryField& g);
double inner_grad_boundary(const BoundaryField& f, const BoundaryField& g);
BoundaryField laplace_beltrami(const BoundaryField& g);

/// Second-order one-sided outward normal derivative (bottom: -d/dy, top: +d/dy).
BoundaryField normal_derivative(const BulkField& f);
BoundaryField trace(const BulkField& f);

// Norms

double norm_H0(const BulkField& z);
double norm_V0(const BulkField& z);
double norm_HGamma(const BoundaryField& z);
double norm_VGamma(const BoundaryField& z);
double norm_H0_pair(const CoupledField& z);
double norm_V0_pair(const CoupledField& z);

/// Poincare-Wirtinger constant valid for the strip: (max(Lx, 2 Ly) / pi)^2.
double poincare_constant(const StripGrid& g);

}  // namespace chdbc
