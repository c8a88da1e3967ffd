#include "chdbc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "chdbc/error.hpp"

namespace chdbc {

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorCode::InvalidArgument, "no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> Table::series(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

void write_csv_header(std::ostream& os, const std::vector<std::string>& columns) {
  for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
  os << '\n';
}

void write_csv_row(std::ostream& os, const std::vector<double>& row) {
  char buf[32];
  for (std::size_t k = 0; k < row.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", row[k]);
    os << (k ? "," : "") << buf;
  }
  os << '\n';
}

void write_csv(std::ostream& os, const Table& t) {
  write_csv_header(os, t.columns);
  for (const auto& r : t.rows) write_csv_row(os, r);
}

// ---------------------------------------------------------------------------

CoupledField default_perturbation(const StripGrid& g) {
  const BulkField b = BulkField::from_function(g, [&](double x, double y) {
    return std::cos(2.0 * std::numbers::pi * x / g.Lx) * (1.0 + 0.5 * std::cos(std::numbers::pi * y / g.Ly)) +
           0.5 * std::sin(4.0 * std::numbers::pi * x / g.Lx);
  });
  return CoupledField::from_bulk(project_P0(b));
}

StabilityReport stability_experiment(const RunConfig& cfg, const CoupledField& perturbation, double delta) {
  StabilityReport rep;
  const StripGrid& g = cfg.grid;
  if (!perturbation.trace_compatible(1e-14)) throw Error(ErrorCode::InvalidArgument, "perturbation must be trace compatible");
  if (!perturbation.zero_mean(cfg.solver.tol_mean)) throw Error(ErrorCode::NonzeroMean, "perturbation must have zero bulk mean");

  RunConfig other = cfg;
  for (std::size_t k = 0; k < other.u0.size(); ++k) other.u0.values[k] += delta * perturbation.bulk.values[k];
  const ConstraintSpec C = cfg.constraint();
  const double h_orig = boundary_mass(cfg.v0().boundary, C);
  const double h_pert = boundary_mass(other.v0().boundary, C);
  if (!admissible_mass(h_pert, C, 0.0)) {
    const double target = clamp_target(h_pert, C);
    const CoupledField zc = build_zc(g, C);
    for (std::size_t k = 0; k < other.u0.size(); ++k) other.u0.values[k] += (target - h_pert) * zc.bulk.values[k];
    rep.reclamped = true;
    rep.inadmissible = std::abs(h_orig - target) > cfg.solver.tol_kkt;
    std::ostringstream note;
    note << "perturbed boundary mass " << h_pert << " re-clamped to " << target;
    if (rep.inadmissible) note << " (ERR_INADMISSIBLE_PERTURBATION: clamping crossed a bound the unperturbed data did not touch)";
    rep.note = note.str();
  }

  const Trajectory a = run(cfg);
  const Trajectory b = run(other);
  const auto pa = a.grid_points();
  const auto pb = b.grid_points();
  const NeumannSolver solver(g);
  const double tau = cfg.tau;
  double integral = 0.0;
  for (std::size_t n = 0; n < std::min(pa.size(), pb.size()); ++n) {
    const CoupledField d = pa[n]->state.v - pb[n]->state.v;
    const BulkField dz = project_P0(d.bulk);
    const double dual = norm_V0(solver.solve(dz, 1e-10, 1e-8));
    if (n > 0) {
      const double dt = pa[n]->state.t - pa[n - 1]->state.t;
      integral += dt * (inner_grad_bulk(d.bulk, d.bulk) + 2.0 * inner_grad_boundary(d.boundary, d.boundary));
    }
    const double lhs = dual * dual + tau * inner_bulk(d.bulk, d.bulk) + inner_boundary(d.boundary, d.boundary) + integral;
    rep.t.push_back(pa[n]->state.t);
    rep.lhs.push_back(lhs);
  }
  rep.rhs0 = rep.lhs.empty() ? 0.0 : rep.lhs.front();
  double num = 0.0, den = 0.0;
  rep.envelope_rate = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < rep.lhs.size(); ++n) {
    const double c = rep.rhs0 > 0.0 ? rep.lhs[n] / rep.rhs0 : 0.0;
    rep.c_hat.push_back(c);
    rep.c_hat_sup = std::max(rep.c_hat_sup, c);
    if (rep.t[n] > 0.0 && c > 0.0) {
      const double l = std::log(c);
      num += rep.t[n] * l;
      den += rep.t[n] * rep.t[n];
      rep.envelope_rate = std::max(rep.envelope_rate, l / rep.t[n]);
    }
  }
  rep.c_hat_T = rep.c_hat.empty() ? 0.0 : rep.c_hat.back();
  rep.fit_rate = den > 0.0 ? num / den : 0.0;
  if (!std::isfinite(rep.envelope_rate)) rep.envelope_rate = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

RecoveryEvaluator::RecoveryEvaluator(const RunConfig& cfg, double eps, double tau)
    : cfg_(cfg),
      eps_(eps),
      tau_(tau),
      pert_(cfg.perturbation()),
      constraint_(cfg.constraint()),
      solver_(cfg.grid),
      zc_(build_zc(cfg.grid, constraint_)) {}

CoupledField RecoveryEvaluator::rate(const SolverState& prev, const SolverState& cur) const {
  CoupledField r = cur.v - prev.v;
  r *= 1.0 / (cur.t - prev.t);
  return r;
}

CoupledField RecoveryEvaluator::q(const SolverState& cur) const {
  return nonlinear_terms(cur.v, cfg_.pair, pert_, eps_, cfg_.forcing.evaluate(cfg_.grid, cur.t));
}

double RecoveryEvaluator::omega(const SolverState& prev, const SolverState& cur) const {
  return compute_omega(rate(prev, cur), q(cur), cur.mult.lambda, constraint_);
}

double RecoveryEvaluator::lambda_formula(const SolverState& prev, const SolverState& cur) const {
  return lambda_from_formula(solver_, cur.v, rate(prev, cur), q(cur), tau_, zc_, constraint_);
}

double RecoveryEvaluator::weak(const SolverState& prev, const SolverState& cur, const CoupledField& test) const {
  const CoupledField r = rate(prev, cur);
  const CoupledField qq = q(cur);
  BulkField bulk = solver_.solve(project_P0(r.bulk), 1e-10, 1e-8);
  for (std::size_t k = 0; k < bulk.size(); ++k) bulk.values[k] += tau_ * r.bulk.values[k] + qq.bulk.values[k];
  BoundaryField bd(cfg_.grid);
  for (std::size_t k = 0; k < bd.size(); ++k)
    bd.values[k] = r.boundary.values[k] + qq.boundary.values[k] + cur.mult.lambda * constraint_.w_gamma.values[k];
  return inner_bulk(bulk, test.bulk) + inner_grad_bulk(cur.v.bulk, test.bulk) + inner_boundary(bd, test.boundary) +
         inner_grad_boundary(cur.v.boundary, test.boundary);
}

BulkField RecoveryEvaluator::bulk_residual(const SolverState& prev, const SolverState& cur, double omega) const {
  const CoupledField r = rate(prev, cur);
  const CoupledField qq = q(cur);
  BulkField res = solver_.solve(project_P0(r.bulk), 1e-10, 1e-8);
  const BulkField lap = laplace_bulk(cur.v.bulk);
  for (std::size_t k = 0; k < res.size(); ++k)
    res.values[k] += tau_ * r.bulk.values[k] - lap.values[k] + qq.bulk.values[k] - omega;
  return res;
}

double RecoveryEvaluator::interior(const SolverState& prev, const SolverState& cur) const {
  const BulkField res = bulk_residual(prev, cur, omega(prev, cur));
  const StripGrid& g = cfg_.grid;
  double s = 0.0;
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) s += g.bulk_weight(j) * res(i, j) * res(i, j);
  return std::sqrt(s);
}

double RecoveryEvaluator::boundary(const SolverState& prev, const SolverState& cur) const {
  const StripGrid& g = cfg_.grid;
  const BulkField res = bulk_residual(prev, cur, omega(prev, cur));
  const CoupledField r = rate(prev, cur);
  const CoupledField qq = q(cur);
  const BoundaryField lg = laplace_beltrami(cur.v.boundary);
  BoundaryField out(g);
  for (int side = 0; side < 2; ++side) {
    const int j = side == 0 ? 0 : g.ny - 1;
    for (int i = 0; i < g.nx; ++i) {
      const double flux = 0.5 * g.dy() * res(i, j);
      out(i, side) = flux + r.boundary(i, side) - lg(i, side) + qq.boundary(i, side) +
                     cur.mult.lambda * constraint_.w_gamma(i, side);
    }
  }
  return norm_HGamma(out);
}

RecoveryReport recovery_check(const std::vector<SolverState>& states, const RunConfig& cfg, int n_tests) {
  RecoveryReport rep;
  rep.tolerance = 10.0 * cfg.solver.newton_tol;
  if (states.size() < 2) return rep;
  const StripGrid& g = cfg.grid;
  const RecoveryEvaluator ev(cfg, states.back().eps > 0.0 ? states.back().eps : cfg.eps(), states.back().tau);

  std::mt19937_64 rng(cfg.solver.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<CoupledField> tests;
  for (int k = 0; k < n_tests; ++k) {
    BulkField b(g);
    for (double& x : b.values) x = U(rng);
    CoupledField z = CoupledField::from_bulk(project_P0(b));
    z *= 1.0 / norm_H0_pair(z);
    tests.push_back(std::move(z));
  }

  for (std::size_t n = 1; n < states.size(); ++n) {
    const SolverState& a = states[n - 1];
    const SolverState& b = states[n];
    if (!(b.t > a.t) || b.step_index != a.step_index + 1) continue;
    RecoveryStep st;
    st.step = b.step_index;
    st.t = b.t;
    for (const CoupledField& z : tests) st.weak = std::max(st.weak, std::abs(ev.weak(a, b, z)));
    st.interior = ev.interior(a, b);
    st.boundary = ev.boundary(a, b);
    st.lambda_kkt = b.mult.lambda;
    st.lambda_formula = ev.lambda_formula(a, b);
    st.omega_state = b.mult.omega;
    st.omega_formula = ev.omega(a, b);
    st.active = b.mult.active;
    rep.max_weak = std::max(rep.max_weak, st.weak);
    rep.max_interior = std::max(rep.max_interior, st.interior);
    rep.max_boundary = std::max(rep.max_boundary, st.boundary);
    if (a.mult.active == b.mult.active)
      rep.max_lambda_gap =
          std::max(rep.max_lambda_gap, std::abs(st.lambda_formula - st.lambda_kkt) / (1.0 + std::abs(st.lambda_kkt)));
    if (st.weak > rep.tolerance || st.interior > rep.tolerance || st.boundary > rep.tolerance) {
      rep.failing_steps.push_back(st.step);
      rep.pass = false;
    }
    rep.steps.push_back(st);
  }
  return rep;
}

RecoveryReport recovery_check(const Trajectory& traj, const RunConfig& cfg, int n_tests) {
  std::vector<SolverState> states;
  states.reserve(traj.points.size());
  for (const TrajectoryPoint& p : traj.points) states.push_back(p.state);
  return recovery_check(states, cfg, n_tests);
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::pair<std::string, std::string>>& core_columns() {
  static const std::vector<std::pair<std::string, std::string>> cols = {
      {"step", "accepted step index"},
      {"t", "time"},
      {"dt", "size of the step that produced this row"},
      {"on_grid", "1 if t is a multiple of the configured dt"},
      {"mean_u", "bulk mean of u = v + m0"},
      {"h", "boundary mass int_G w v_G"},
      {"lambda", "constraint multiplier"},
      {"omega", "mean chemical potential"},
      {"active", "-1 lower bound active, 1 upper bound active, 0 inactive"},
      {"energy", "total free energy including the perturbation potential"},
      {"residual", "scaled nonlinear residual of the accepted step"},
      {"newton_iterations", "Newton iterations spent on the step"},
  };
  return cols;
}

const std::vector<std::pair<std::string, std::string>>& inventory() {
  static const std::vector<std::pair<std::string, std::string>> cols = {
      {"vprime_V0dual", "|v'|_V0*"},
      {"sqrt_tau_vprime_H0", "sqrt(tau) |v'|_H0"},
      {"v_V0", "|grad v|_L2"},
      {"beta_hat_eps", "int beta_hat_eps(v+m0)"},
      {"vGprime_HG", "|v_G'|_HG"},
      {"vG_VG", "|v_G|_VG"},
      {"beta_hat_G_eps", "int_G beta_hat_G,eps(v_G+m0)"},
      {"abs_lambda", "|lambda|"},
      {"abs_omega", "|omega|"},
      {"beta_eps_L2", "|beta_eps(v+m0)|_L2"},
      {"beta_G_eps_HG", "|beta_G,eps(v_G+m0)|_HG"},
      {"lap_v_L2", "|Delta v|_L2 with one-sided normal derivative in the ghost rows"},
      {"lapG_vG_HG", "|Delta_G v_G|_HG"},
      {"dn_v_HG", "|dn v|_HG"},
  };
  return cols;
}

}  // namespace

const std::vector<std::string>& monitor_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& c : inventory()) out.push_back(c.first);
    return out;
  }();
  return names;
}

SeriesBuilder::SeriesBuilder(const RunConfig& cfg, double eps, double tau)
    : cfg_(cfg), eps_(eps), tau_(tau), pert_(cfg.perturbation()), constraint_(cfg.constraint()), solver_(cfg.grid) {
  for (const auto& c : core_columns()) {
    columns_.push_back(c.first);
    descriptions_.push_back(c.second);
  }
  for (const auto& c : inventory()) {
    columns_.push_back(c.first);
    descriptions_.push_back(c.second);
  }
}

std::vector<double> SeriesBuilder::row(const TrajectoryPoint* prev, const TrajectoryPoint& cur) const {
  const SolverState& s = cur.state;
  const StripGrid& g = cfg_.grid;
  const double m0 = pert_.m0;
  std::vector<double> r;
  r.reserve(columns_.size());
  r.push_back(static_cast<double>(s.step_index));
  r.push_back(s.t);
  r.push_back(cur.dt);
  r.push_back(cur.on_grid ? 1.0 : 0.0);
  r.push_back(m0 + mean_bulk(s.v.bulk));
  r.push_back(s.h);
  r.push_back(s.mult.lambda);
  r.push_back(s.mult.omega);
  r.push_back(s.mult.active == ActiveBound::Upper ? 1.0 : (s.mult.active == ActiveBound::Lower ? -1.0 : 0.0));
  r.push_back(cur.energy);
  r.push_back(cur.info.residual);
  r.push_back(static_cast<double>(cur.info.newton_iterations));

  double vp_dual = 0.0, vp_h0 = 0.0, vgp = 0.0;
  if (prev && cur.dt > 0.0) {
    CoupledField rate = s.v - prev->state.v;
    rate *= 1.0 / cur.dt;
    vp_dual = norm_V0(solver_.solve(project_P0(rate.bulk), 1e-10, 1e-8));
    vp_h0 = norm_H0(rate.bulk);
    vgp = norm_HGamma(rate.boundary);
  }
  BulkField bh(g), be(g);
  for (std::size_t k = 0; k < bh.size(); ++k) {
    const double u = s.v.bulk.values[k] + m0;
    bh.values[k] = cfg_.pair.envelope_bulk(eps_, u);
    be.values[k] = cfg_.pair.yosida_bulk(eps_, u);
  }
  BoundaryField gh(g), ge(g);
  for (std::size_t k = 0; k < gh.size(); ++k) {
    const double u = s.v.boundary.values[k] + m0;
    gh.values[k] = cfg_.pair.envelope_boundary(eps_, u);
    ge.values[k] = cfg_.pair.yosida_boundary(eps_, u);
  }
  const BoundaryField dn = normal_derivative(s.v.bulk);
  r.push_back(vp_dual);
  r.push_back(std::sqrt(tau_) * vp_h0);
  r.push_back(norm_V0(s.v.bulk));
  r.push_back(integrate_bulk(bh));
  r.push_back(vgp);
  r.push_back(norm_VGamma(s.v.boundary));
  r.push_back(integrate_boundary(gh));
  r.push_back(std::abs(s.mult.lambda));
  r.push_back(std::abs(s.mult.omega));
  r.push_back(norm_H0(be));
  r.push_back(norm_HGamma(ge));
  r.push_back(norm_H0(laplace_bulk(s.v.bulk, dn)));
  r.push_back(norm_HGamma(laplace_beltrami(s.v.boundary)));
  r.push_back(norm_HGamma(dn));
  return r;
}

Table run_series(const Trajectory& traj, const RunConfig& cfg) {
  const SeriesBuilder sb(cfg, traj.eps, traj.tau);
  Table t;
  t.columns = sb.columns();
  t.descriptions = sb.descriptions();
  for (std::size_t k = 0; k < traj.points.size(); ++k)
    t.rows.push_back(sb.row(k ? &traj.points[k - 1] : nullptr, traj.points[k]));
  return t;
}

Table bound_monitors(const Trajectory& traj, const RunConfig& cfg) {
  const Table full = run_series(traj, cfg);
  Table t;
  std::vector<std::size_t> idx = {full.column("t"), full.column("dt")};
  for (const std::string& name : monitor_columns()) idx.push_back(full.column(name));
  for (std::size_t c : idx) {
    t.columns.push_back(full.columns[c]);
    t.descriptions.push_back(full.descriptions[c]);
  }
  for (const auto& r : full.rows) {
    std::vector<double> row;
    for (std::size_t c : idx) row.push_back(r[c]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::map<std::string, double> monitor_maxima(const Table& monitors) {
  std::map<std::string, double> out;
  for (const std::string& name : monitor_columns()) {
    double m = 0.0;
    for (double x : monitors.series(name)) m = std::max(m, x);
    out[name] = m;
  }
  const auto dt = monitors.series("dt");
  const auto lam = monitors.series("abs_lambda");
  const auto om = monitors.series("abs_omega");
  double l2 = 0.0, o2 = 0.0;
  for (std::size_t k = 0; k < dt.size(); ++k) {
    l2 += dt[k] * lam[k] * lam[k];
    o2 += dt[k] * om[k] * om[k];
  }
  out["lambda_L2T"] = std::sqrt(l2);
  out["omega_L2T"] = std::sqrt(o2);
  return out;
}

}  // namespace chdbc
