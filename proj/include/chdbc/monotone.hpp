#pragma once

// Maximal monotone graphs on the real line, their convex potentials, and the
// regularization machinery built on them: resolvents J_eps = (I + eps*beta)^-1,
// Yosida approximations beta_eps = (r - J_eps r)/eps and Moreau-Yosida
// envelopes. The boundary graph of a GraphPair is regularized with the
// effective parameter eps*rho, not eps.

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace chdbc {

struct Knot {
  double r;
  double s;
};

class MonotoneGraph {
 public:
  enum class Kind { PowerOdd, PiecewiseLinear, IntervalIndicator, Custom };

  /// r -> r^p, p odd and >= 1.
  static MonotoneGraph power_odd(int p);
  /// Monotone polyline through the knots (sorted, nondecreasing in both
  /// coordinates); equal consecutive r give a vertical (multivalued) piece.
  /// Outside the knot range the first/last segment is extended linearly.
  static MonotoneGraph piecewise_linear(std::vector<Knot> knots);
  /// Subdifferential of the indicator of [a, b], a <= 0 <= b.
  static MonotoneGraph interval_indicator(double a, double b);
  /// Single-valued continuous nondecreasing beta with beta(0) = 0 and its
  /// potential. `derivative` is optional and only accelerates the resolvent.
  static MonotoneGraph custom(std::string name, std::function<double(double)> beta,
                              std::function<double(double)> potential,
                              std::function<double(double)> derivative = {});

  Kind kind() const;
  const std::string& name() const { return name_; }
  bool full_domain() const { return kind() != Kind::IntervalIndicator; }
  bool in_domain(double r) const;

  /// [lo, hi] with beta(r) = [lo, hi]; infinite ends allowed. Throws ERR_OUT_OF_DOMAIN.
  std::pair<double, double> section(double r) const;
  double minimal_section(double r) const;
  /// Convex potential; +inf outside the domain.
  double potential(double r) const;

  double resolvent(double eps, double r) const;
  /// dJ_eps/dr (one-sided at kinks).
  double resolvent_derivative(double eps, double r) const;
  double yosida(double eps, double r) const;
  double yosida_derivative(double eps, double r) const;
  double moreau_envelope(double eps, double r) const;

  /// Breakpoints worth adding to validation lattices.
  std::vector<double> breakpoints() const;

 private:
  struct Power { int p; };
  struct Polyline { std::vector<Knot> knots; };
  struct Interval { double a, b; };
  struct Custom {
    std::function<double(double)> beta, potential, derivative;
  };

  MonotoneGraph(std::string name, std::variant<Power, Polyline, Interval, Custom> impl)
      : name_(std::move(name)), impl_(std::move(impl)) {}

  std::string name_;
  std::variant<Power, Polyline, Interval, Custom> impl_;
};

/// Parses `quartic`, `deep_quench`, `linear`, `power:<p>` and `pwl:r:s,r:s,...`.
MonotoneGraph graph_from_preset(const std::string& spec);

struct GraphPair {
  MonotoneGraph bulk;
  MonotoneGraph boundary;
  double rho = 1.0;
  double c0 = 1.0;

  double yosida_bulk(double eps, double r) const { return bulk.yosida(eps, r); }
  double yosida_bulk_derivative(double eps, double r) const { return bulk.yosida_derivative(eps, r); }
  double envelope_bulk(double eps, double r) const { return bulk.moreau_envelope(eps, r); }
  double yosida_boundary(double eps, double r) const { return boundary.yosida(eps * rho, r); }
  double yosida_boundary_derivative(double eps, double r) const { return boundary.yosida_derivative(eps * rho, r); }
  double envelope_boundary(double eps, double r) const { return boundary.moreau_envelope(eps * rho, r); }
};

double yosida_boundary(const GraphPair& pair, double eps, double r);

struct Violation {
  double r;
  std::string check;
  double magnitude;
};

struct A1Report {
  bool pass = true;
  std::vector<Violation> violations;
};

struct A5Report {
  bool pass = true;
  bool growth_bulk_ok = true;      // |s| <= c0 (1 + bhat(r)), s in beta(r)
  bool growth_boundary_ok = true;  // same for the boundary graph
  bool compat_ok = true;           // |beta°(r)| <= rho |beta_G°(r)| + c0
  bool eps_level_ok = true;        // the three inequalities for the regularized graphs
  double tight_c0_growth = 0.0;    // smallest c0 satisfying both growth bounds on the lattice
  double tight_c0_compat = 0.0;    // smallest c0 satisfying compat at the given rho
  double tight_rho = 0.0;          // smallest rho satisfying compat at the given c0
  std::vector<Violation> violations;
};

/// 401 points on [-10, 10] plus the graphs' breakpoints, sorted and symmetric.
std::vector<double> default_lattice(const GraphPair& pair);
std::vector<double> default_lattice(const MonotoneGraph& g);

A1Report validate_A1(const MonotoneGraph& g, std::span<const double> lattice);
A1Report validate_A1(const MonotoneGraph& g);
A5Report validate_A5(const GraphPair& pair, std::span<const double> lattice);

/// beta_eps viewed as a single-valued graph whose potential is the envelope.
MonotoneGraph regularized_graph(const MonotoneGraph& g, double eps);

namespace kernels {
/// out[k] = yosida(eps, in[k] + shift), OpenMP-parallel.
void yosida_map(const MonotoneGraph& g, double eps, double shift, std::span<const double> in, std::span<double> out);
namespace serial {
void yosida_map(const MonotoneGraph& g, double eps, double shift, std::span<const double> in, std::span<double> out);
}
}  // namespace kernels

}  // namespace chdbc
