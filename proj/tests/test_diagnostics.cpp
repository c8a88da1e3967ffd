#include <cmath>
#include <sstream>
#include <string>

#include "chdbc/config.hpp"
#include "chdbc/diagnostics.hpp"
#include "chdbc/error.hpp"
#include "dense_oracle.hpp"
#include "doctest.h"

using namespace chdbc;

namespace {

RunConfig load(const std::string& text, std::vector<std::pair<std::string, std::string>> ov = {}) {
  return parse_config_text(text, ov).run;
}

const char* kBase = R"(
[grid]
nx = 16
ny = 17
[initial]
u0 = 0.1*cos(x) + 0.05*cos(pi*y)
[time]
dt = 2e-3
T = 0.02
)";

const char* kConstrained = R"(
[grid]
nx = 16
ny = 17
[initial]
u0 = 0.1*cos(x)
[constraint]
k_lo = -0.5
k_hi = 0.5
[forcing]
f_gamma = 4*(1 + 0.5*cos(x))
[time]
dt = 1e-3
T = 0.05
)";

// |z|_{V0*}^2 = <A^+ z, W z> with A the dense Neumann -Laplacian.
double dual_norm_sq(const StripGrid& g, const BulkField& z) {
  const int n = static_cast<int>(g.bulk_size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n + 1, n + 1);
  B.topLeftCorner(n, n) = oracle::neg_laplacian(g);
  Eigen::VectorXd W(n), rhs = Eigen::VectorXd::Zero(n + 1);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) W(static_cast<int>(g.node(i, j))) = g.bulk_weight(j);
  B.block(n, 0, 1, n) = W.transpose();
  B.block(0, n, n, 1) = Eigen::VectorXd::Ones(n);
  for (int k = 0; k < n; ++k) rhs(k) = z.values[k];
  const Eigen::VectorXd y = B.fullPivLu().solve(rhs).head(n);
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += y(k) * W(k) * z.values[k];
  return s;
}

}  // namespace

TEST_CASE("csv round trip") {
  Table t;
  t.columns = {"a", "b"};
  t.rows = {{0.1, 1.0 / 3.0}, {-2.5e-300, 12345678.9}};
  std::ostringstream os;
  write_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "a,b");
  for (const auto& row : t.rows) {
    std::getline(is, line);
    const auto comma = line.find(',');
    CHECK(std::stod(line.substr(0, comma)) == row[0]);
    CHECK(std::stod(line.substr(comma + 1)) == row[1]);
  }
  CHECK(t.series("b")[1] == 12345678.9);
  CHECK_THROWS_AS(t.column("c"), Error);
}

TEST_CASE("stability experiment") {
  const RunConfig cfg = load(kBase);
  const CoupledField p = default_perturbation(cfg.grid);
  CHECK(p.trace_compatible());
  CHECK(std::abs(mean_bulk(p.bulk)) < 1e-14);

  SUBCASE("zero perturbation gives a zero difference") {
    const StabilityReport r = stability_experiment(cfg, p, 0.0);
    for (double x : r.lhs) CHECK(x == 0.0);
    CHECK(r.rhs0 == 0.0);
  }
  SUBCASE("initial value against a dense evaluation") {
    const double delta = 1e-3;
    const StabilityReport r = stability_experiment(cfg, p, delta);
    const BulkField d = delta * p.bulk;
    const double expect = dual_norm_sq(cfg.grid, d) + cfg.tau * inner_bulk(d, d) +
                          inner_boundary(trace(d), trace(d));
    CHECK(r.rhs0 == doctest::Approx(expect).epsilon(1e-8));
    CHECK(r.t.size() == static_cast<std::size_t>(cfg.steps() + 1));
    CHECK(r.c_hat.front() == doctest::Approx(1.0));
    for (double c : r.c_hat) CHECK(c > 0.0);
    CHECK(r.c_hat_sup >= r.c_hat_T);
    CHECK_FALSE(r.reclamped);
  }
  SUBCASE("quadratic scaling in delta") {
    const StabilityReport a = stability_experiment(cfg, p, 1e-3);
    const StabilityReport b = stability_experiment(cfg, p, 1e-4);
    for (std::size_t n = 0; n < a.lhs.size(); ++n) CHECK(b.lhs[n] / a.lhs[n] == doctest::Approx(1e-2).epsilon(1e-2));
    CHECK(b.c_hat_T == doctest::Approx(a.c_hat_T).epsilon(1e-2));
  }
  SUBCASE("invalid perturbations") {
    CoupledField bad = p;
    bad.boundary.values[0] += 1.0;
    CHECK_THROWS_AS(stability_experiment(cfg, bad, 1e-3), Error);
    const CoupledField shifted = CoupledField::from_bulk(BulkField(cfg.grid, 1.0));
    try {
      (void)stability_experiment(cfg, shifted, 1e-3);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonzeroMean);
    }
  }
}

TEST_CASE("stability re-clamps perturbed data onto the admissible set") {
  const StripGrid g(6.283185307179586, 1.0, 16, 17);
  // zero-mean bulk with a positive trace on both sides
  const BulkField b = project_P0(BulkField::from_function(g, [](double, double y) { return (y - 0.5) * (y - 0.5); }));
  const CoupledField p = CoupledField::from_bulk(b);
  REQUIRE(integrate_boundary(p.boundary) > 0.0);

  RunConfig cfg = load(kConstrained, {{"constraint.k_hi", "0"}, {"forcing.f_gamma", "0"}, {"time.T", "0.005"}});
  StabilityReport r = stability_experiment(cfg, p, 1e-3);
  CHECK(r.reclamped);
  CHECK_FALSE(r.inadmissible);

  cfg = load(kConstrained, {{"constraint.k_hi", "1e-4"}, {"forcing.f_gamma", "0"}, {"time.T", "0.005"}});
  r = stability_experiment(cfg, p, 1e-1);
  CHECK(r.reclamped);
  CHECK(r.inadmissible);
  CHECK(r.note.find("ERR_INADMISSIBLE_PERTURBATION") != std::string::npos);
}

TEST_CASE("recovery of the strong equations") {
  for (const char* text : {kBase, kConstrained}) {
    const RunConfig cfg = load(text);
    const Trajectory tr = run(cfg);
    const RecoveryReport rep = recovery_check(tr, cfg);
    CHECK(rep.pass);
    CHECK(rep.steps.size() == tr.points.size() - 1);
    CHECK(rep.max_weak <= rep.tolerance);
    CHECK(rep.max_interior <= rep.tolerance);
    CHECK(rep.max_boundary <= rep.tolerance);
    CHECK(rep.max_lambda_gap < 1e-8);
    for (const RecoveryStep& s : rep.steps) CHECK(s.omega_state == doctest::Approx(s.omega_formula).epsilon(1e-8));
  }

  const RunConfig cfg = load(kConstrained);
  const Trajectory tr = run(cfg);
  std::vector<SolverState> states;
  for (const TrajectoryPoint& p : tr.points) states.push_back(p.state);
  states[10].v.bulk.values[37] += 1e-6;
  states[10].v = CoupledField::from_bulk(states[10].v.bulk);
  const RecoveryReport bad = recovery_check(states, cfg);
  CHECK_FALSE(bad.pass);
  REQUIRE_FALSE(bad.failing_steps.empty());
  CHECK(bad.failing_steps.front() == states[10].step_index);

  // pairs that are not consecutive steps are skipped
  std::vector<SolverState> gap = {states[0], states[2], states[3]};
  CHECK(recovery_check(gap, cfg).steps.size() == 1);
}

TEST_CASE("weak identity is linear in the test pair") {
  const RunConfig cfg = load(kBase);
  const Trajectory tr = run(cfg);
  const RecoveryEvaluator ev(cfg, tr.eps, tr.tau);
  // an inconsistent pair so the functional is far from zero
  const SolverState& a = tr.points[0].state;
  const SolverState& b = tr.points[3].state;
  const StripGrid& g = cfg.grid;
  const CoupledField z1 = CoupledField::from_bulk(project_P0(BulkField::from_function(g, [](double x, double y) {
    return std::cos(x) * y;
  })));
  const CoupledField z2 = CoupledField::from_bulk(project_P0(BulkField::from_function(g, [](double x, double y) {
    return std::cos(2 * x) + y * y;
  })));
  const double w1 = ev.weak(a, b, z1), w2 = ev.weak(a, b, z2);
  CHECK(std::abs(w1) > 1e-6);
  CHECK(ev.weak(a, b, z1 + 2.0 * z2) == doctest::Approx(w1 + 2.0 * w2).epsilon(1e-10));
  CHECK(ev.weak(a, b, CoupledField(g)) == 0.0);
}

TEST_CASE("series and monitors") {
  const RunConfig cfg = load(kConstrained, {{"time.T", "0.02"}});
  const Trajectory tr = run(cfg);
  const Table t = run_series(tr, cfg);
  CHECK(t.rows.size() == tr.points.size());
  CHECK(t.columns.size() == t.descriptions.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const SolverState& s = tr.points[k].state;
    CHECK(t.rows[k][t.column("mean_u")] == doctest::Approx(tr.m0));
    CHECK(t.rows[k][t.column("energy")] == tr.points[k].energy);
    CHECK(t.rows[k][t.column("v_V0")] == doctest::Approx(norm_V0(s.v.bulk)));
    CHECK(t.rows[k][t.column("h")] == s.h);
    CHECK(t.rows[k][t.column("abs_lambda")] == std::abs(s.mult.lambda));
  }
  CHECK(t.rows[0][t.column("vprime_V0dual")] == 0.0);

  const Table m = bound_monitors(tr, cfg);
  CHECK(m.columns.size() == monitor_columns().size() + 2);
  for (const auto& row : m.rows)
    for (std::size_t c = 2; c < row.size(); ++c) CHECK(row[c] >= 0.0);
  const auto mx = monitor_maxima(m);
  CHECK(mx.count("lambda_L2T") == 1);
  CHECK(mx.count("omega_L2T") == 1);
  double expect = 0.0;
  for (const auto& row : m.rows) expect = std::max(expect, row[m.column("abs_lambda")]);
  CHECK(mx.at("abs_lambda") == expect);
  CHECK(mx.at("abs_lambda") > 0.0);
}
