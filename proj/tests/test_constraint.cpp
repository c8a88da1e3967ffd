#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "chdbc/constraint.hpp"
#include "chdbc/error.hpp"
#include "chdbc/operators.hpp"
#include "doctest.h"

using namespace chdbc;

namespace {

ConstraintSpec uniform(const StripGrid& g, double lo, double hi, double m0 = 0.0) {
  return ConstraintSpec::make(BoundaryField(g, 1.0), lo, hi, m0);
}

}  // namespace

TEST_CASE("constraint setup") {
  const StripGrid g(2.0, 1.0, 8, 5);
  const ConstraintSpec C = uniform(g, -1.0, 2.0, 0.25);
  CHECK(C.sigma0 == doctest::Approx(4.0));
  CHECK(C.h_lo == doctest::Approx(-1.0 - 0.25 * 4.0));
  CHECK(C.h_hi == doctest::Approx(2.0 - 0.25 * 4.0));
  CHECK_FALSE(C.equality());

  try {
    (void)uniform(g, 1.0, 0.5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
  try {
    (void)ConstraintSpec::make(BoundaryField(g, 0.0), -1.0, 1.0, 0.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateWeight);
  }
  BoundaryField neg(g, 1.0);
  neg.values[3] = -0.1;
  CHECK_THROWS_AS(ConstraintSpec::make(neg, -1.0, 1.0, 0.0), Error);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(uniform(g, -inf, inf).h_hi));

  const BoundaryField b = weight_from_preset(g, "bottom_only");
  CHECK(integrate_boundary(b) == doctest::Approx(2.0));
  CHECK_THROWS_AS(weight_from_preset(g, "top_heavy"), Error);
}

TEST_CASE("boundary mass, admissibility and clamping") {
  const StripGrid g(2.0, 1.0, 8, 5);
  const ConstraintSpec C = uniform(g, -1.0, 1.0);
  CHECK(boundary_mass(BoundaryField(g), C) == 0.0);
  CHECK(boundary_mass(BoundaryField(g, 0.3), C) == doctest::Approx(4 * 0.3));

  const ConstraintSpec B = ConstraintSpec::make(weight_from_preset(g, "bottom_only"), -1.0, 1.0, 0.0);
  const auto top = BoundaryField::from_function(g, [](double, int side) { return side == 1 ? 5.0 : 0.0; });
  CHECK(boundary_mass(top, B) == 0.0);

  CHECK(admissible_mass(0.0, C, 0.0));
  CHECK(clamp_target(0.0, C) == 0.0);
  CHECK_FALSE(admissible_mass(1.5, C, 0.0));
  CHECK(clamp_target(1.5, C) == 1.0);
  CHECK(admissible_mass(1.0 + 5e-9, C, 1e-8));
  const ConstraintSpec E = uniform(g, 0.2, 0.2);
  CHECK(E.equality());
  CHECK(admissible_mass(0.2, E, 0.0));
  CHECK(admissible(BoundaryField(g, 0.05), E, 1e-12));
}

TEST_CASE("rescaling weight and bounds leaves the admissible set unchanged") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> N(0.0, 0.5);
  const StripGrid g(2.0, 1.0, 8, 5);
  const BoundaryField w = BoundaryField::from_function(g, [](double x, int side) { return 1.0 + 0.5 * std::cos(x) + side; });
  BoundaryField w2 = w;
  w2 *= 2.0;
  // exact power-of-two scaling keeps the comparison bit-exact
  const ConstraintSpec C1 = ConstraintSpec::make(w, -0.5, 0.75, 0.1);
  const ConstraintSpec C2 = ConstraintSpec::make(w2, -1.0, 1.5, 0.1);
  for (int k = 0; k < 500; ++k) {
    BoundaryField v(g);
    for (double& x : v.values) x = N(rng);
    CHECK(admissible(v, C1, 0.0) == admissible(v, C2, 0.0));
  }
}

TEST_CASE("KKT conditions") {
  const StripGrid g(2.0, 1.0, 8, 5);
  const ConstraintSpec C = uniform(g, -1.0, 1.0);
  CHECK(kkt_check(0.0, 0.0, C, 1e-8).pass);
  CHECK_FALSE(kkt_check(0.0, 0.1, C, 1e-8).pass);
  CHECK(kkt_check(C.h_hi, 2.3, C, 1e-8).pass);
  const KktReport bad = kkt_check(C.h_hi, -2.3, C, 1e-8);
  CHECK_FALSE(bad.pass);
  CHECK(bad.violation == doctest::Approx(2.3));
  CHECK(kkt_check(C.h_lo, -0.7, C, 1e-8).pass);
  CHECK_FALSE(kkt_check(C.h_lo, 0.7, C, 1e-8).pass);
  CHECK_FALSE(kkt_check(C.h_hi + 0.1, 0.0, C, 1e-8).pass);
  // equality constraint: any sign
  const ConstraintSpec E = uniform(g, 0.2, 0.2);
  CHECK(kkt_check(E.h_hi, -5.0, E, 1e-8).pass);
  CHECK(kkt_check(E.h_hi, 5.0, E, 1e-8).pass);
}

TEST_CASE("auxiliary field z_c") {
  for (auto [nx, ny] : {std::pair{8, 9}, std::pair{16, 17}, std::pair{32, 33}, std::pair{10, 12}}) {
    const StripGrid g(2.0, 1.0, nx, ny);
    const ConstraintSpec C = uniform(g, -1.0, 1.0);
    const CoupledField z = build_zc(g, C);
    CHECK(std::abs(mean_bulk(z.bulk)) < 1e-12);
    CHECK(z.trace_compatible());
    for (double v : z.boundary.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  }
  const StripGrid g(0.5, 1.0, 8, 9);
  const CoupledField z = build_zc(g, uniform(g, -1.0, 1.0));
  for (double v : z.boundary.values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("omega and the chemical potential") {
  const StripGrid g(2.0, 1.0, 16, 9);
  const ConstraintSpec C = uniform(g, -1.0, 1.0);
  CHECK(compute_omega(CoupledField(g), CoupledField(g), 0.0, C) == 0.0);

  // direct quadrature of the defining formula
  std::mt19937_64 rng(42);
  std::normal_distribution<double> N;
  CoupledField dv(g), q(g);
  for (double& x : dv.bulk.values) x = N(rng);
  for (double& x : dv.boundary.values) x = N(rng);
  for (double& x : q.bulk.values) x = N(rng);
  for (double& x : q.boundary.values) x = N(rng);
  const double lambda = 0.8;
  double expect = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) expect += g.bulk_weight(j) * q.bulk(i, j);
  for (std::size_t b = 0; b < g.boundary_size(); ++b)
    expect += g.dx() * (dv.boundary.values[b] + q.boundary.values[b] + lambda * 1.0);
  expect /= g.measure();
  CHECK(compute_omega(dv, q, lambda, C) == doctest::Approx(expect).epsilon(1e-13));

  const NeumannSolver solver(g);
  BulkField rate(g);
  for (double& x : rate.values) x = N(rng);
  rate = project_P0(rate);
  const BulkField mu = chemical_potential(solver, rate, 0.37);
  CHECK(mean_bulk(mu) == doctest::Approx(0.37).epsilon(1e-10));
}

TEST_CASE("nonlinear terms") {
  const StripGrid g(2.0, 1.0, 8, 5);
  const GraphPair pair{graph_from_preset("quartic"), graph_from_preset("quartic"), 2.0, 2.0};
  const PerturbationSpec P = perturbation_from_preset("linear:-1", 0.1);
  const double eps = 0.05;
  const CoupledField v = CoupledField::from_bulk(BulkField::from_function(g, [](double x, double y) { return 0.3 * std::sin(x) + y; }));
  const CoupledField f(BulkField(g, 0.2), BoundaryField(g, -0.1));
  const CoupledField q = nonlinear_terms(v, pair, P, eps, f);
  for (std::size_t k = 0; k < v.bulk.size(); ++k) {
    const double u = v.bulk.values[k] + 0.1;
    CHECK(q.bulk.values[k] == doctest::Approx(pair.bulk.yosida(eps, u) - u - 0.2));
  }
  for (std::size_t k = 0; k < v.boundary.size(); ++k) {
    const double u = v.boundary.values[k] + 0.1;
    CHECK(q.boundary.values[k] ==
          doctest::Approx(eps * v.boundary.values[k] + pair.boundary.yosida(eps * 2.0, u) - u + 0.1));
  }
}

TEST_CASE("lambda formula") {
  const StripGrid g(2.0, 1.0, 16, 9);
  const ConstraintSpec C = uniform(g, -1.0, 1.0);
  const NeumannSolver solver(g);
  const CoupledField zc = build_zc(g, C);
  // stationary state with vanishing residuals
  CHECK(std::abs(lambda_from_formula(solver, CoupledField(g), CoupledField(g), CoupledField(g), 1.0, zc, C)) < 1e-12);
  // constant q_G only: lambda = -|Gamma| q_G / sigma0
  const CoupledField q(BulkField(g, 0.4), BoundaryField(g, 0.9));
  CHECK(lambda_from_formula(solver, CoupledField(g), CoupledField(g), q, 0.5, zc, C) == doctest::Approx(-0.9).epsilon(1e-12));
  // a linear functional of (dv, q) at fixed v
  std::mt19937_64 rng(43);
  std::normal_distribution<double> N;
  CoupledField a(g), b(g);
  for (double& x : a.boundary.values) x = N(rng);
  for (double& x : b.bulk.values) x = N(rng);
  a.bulk = project_P0(BulkField(g, std::vector<double>(g.bulk_size(), 0.0)));
  const CoupledField zero(g);
  const double la = lambda_from_formula(solver, zero, CoupledField(g), a, 0.5, zc, C);
  const double lb = lambda_from_formula(solver, zero, CoupledField(g), b, 0.5, zc, C);
  const double lab = lambda_from_formula(solver, zero, CoupledField(g), a + b, 0.5, zc, C);
  CHECK(lab == doctest::Approx(la + lb).epsilon(1e-12));
}
