#include "chdbc/stepper.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "chdbc/error.hpp"
#include "chdbc/kernels.hpp"

namespace chdbc {

CoupledField ForcingSpec::evaluate(const StripGrid& g, double t) const {
  CoupledField out(g);
  if (f)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) out.bulk(i, j) = f(g.x(i), g.y(j), t);
  if (f_gamma)
    for (int side = 0; side < 2; ++side)
      for (int i = 0; i < g.nx; ++i) out.boundary(i, side) = f_gamma(g.x(i), side, t);
  return out;
}

CoupledField RunConfig::v0() const {
  BulkField v = u0;
  const double m = mean_bulk(u0);
  for (double& x : v.values) x -= m;
  return CoupledField::from_bulk(v);
}

PerturbationSpec RunConfig::perturbation() const {
  PerturbationSpec P = perturbation_from_preset(perturbation_preset, m0());
  if (!perturbation_gamma_preset.empty() && perturbation_gamma_preset != perturbation_preset) {
    const PerturbationSpec G = perturbation_from_preset(perturbation_gamma_preset, P.m0);
    P.pi_gamma = G.pi;
    P.dpi_gamma = G.dpi;
    P.pi_gamma_hat = G.pi_hat;
    P.L_gamma = G.L;
    P.name += "/" + G.name;
  }
  return P;
}

int RunConfig::steps() const { return static_cast<int>(std::llround(T / dt)); }

void check_initial_data(const RunConfig& cfg) {
  const double m0 = cfg.m0();
  const ConstraintSpec C = cfg.constraint();
  const CoupledField v = cfg.v0();
  const double h = boundary_mass(v.boundary, C);
  if (!admissible_mass(h, C, cfg.solver.tol_kkt)) {
    std::ostringstream msg;
    msg << "initial boundary mass h(0) = " << h << " outside [" << C.h_lo << ", " << C.h_hi
        << "] (compatibility of the initial data)";
    throw Error(ErrorCode::IncompatibleInitialData, msg.str());
  }
  for (double u : cfg.u0.values)
    if (!std::isfinite(cfg.pair.bulk.potential(u)) || !std::isfinite(cfg.pair.boundary.potential(u))) {
      std::ostringstream msg;
      msg << "initial value u0 = " << u << " outside the domain of the potentials";
      throw Error(ErrorCode::IncompatibleInitialData, msg.str());
    }
  (void)m0;
}

std::vector<const TrajectoryPoint*> Trajectory::grid_points() const {
  std::vector<const TrajectoryPoint*> out;
  for (const TrajectoryPoint& p : points)
    if (p.on_grid) out.push_back(&p);
  return out;
}

namespace kernels {

namespace {

inline void node_residual(const ResidualInputs& in, std::ptrdiff_t k, double& e1, double& e2) {
  const StripGrid& g = *in.grid;
  const int nx = g.nx;
  const int ny = g.ny;
  const int j = static_cast<int>(k / nx);
  const int i = static_cast<int>(k % nx);
  const std::size_t row = static_cast<std::size_t>(j) * nx;
  const int ip = (i + 1 == nx) ? 0 : i + 1;
  const int im = (i == 0) ? nx - 1 : i - 1;
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dy() * g.dy());
  auto lap = [&](std::span<const double> f) {
    const double c = f[row + i];
    const double lxx = (f[row + ip] - 2.0 * c + f[row + im]) * idx2;
    double lyy;
    if (j == 0) lyy = 2.0 * (f[row + nx + i] - c) * idy2;
    else if (j == ny - 1) lyy = 2.0 * (f[row - nx + i] - c) * idy2;
    else lyy = (f[row + nx + i] - 2.0 * c + f[row - nx + i]) * idy2;
    return lxx + lyy;
  };
  const double W = g.bulk_weight(j);
  const double v = in.v[k];
  const double rate = (v - in.v_prev[k]) / in.dt;
  const double u = v + in.pert->m0;
  e1 = W * rate - W * lap(in.mu);
  e2 = -W * in.mu[k] + W * (in.tau * rate + in.pair->yosida_bulk(in.eps, u) + in.pert->pi(u) - in.f[k]) -
       W * lap(in.v);
  if (j == 0 || j == ny - 1) {
    const std::size_t b = static_cast<std::size_t>(j == 0 ? 0 : 1) * nx + i;
    const double dx = g.dx();
    const double lg = (in.v[row + ip] - 2.0 * v + in.v[row + im]) * idx2;
    e2 += dx * (rate + in.pair->yosida_boundary(in.eps, u) + in.eps * v + in.pert->pi_gamma(u) - in.f_gamma[b] +
                in.lambda * in.w[b]) -
          dx * lg;
  }
}

}  // namespace

void residual(const ResidualInputs& in, std::span<double> e1, std::span<double> e2) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.grid->bulk_size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) node_residual(in, k, e1[k], e2[k]);
}

namespace serial {

void residual(const ResidualInputs& in, std::span<double> e1, std::span<double> e2) {
  const StripGrid& g = *in.grid;
  const std::size_t n = g.bulk_size();
  std::vector<double> lap_v(n), lap_mu(n), lap_g(g.boundary_size());
  serial::laplace_bulk(g, in.v, {}, lap_v);
  serial::laplace_bulk(g, in.mu, {}, lap_mu);
  std::vector<double> trace_v(g.boundary_size());
  for (std::size_t b = 0; b < trace_v.size(); ++b) trace_v[b] = in.v[g.boundary_node(b)];
  serial::laplace_beltrami(g, trace_v, lap_g);
  const double dx = g.dx();
  for (int j = 0; j < g.ny; ++j) {
    const double W = g.bulk_weight(j);
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = g.node(i, j);
      const double rate = (in.v[k] - in.v_prev[k]) / in.dt;
      const double u = in.v[k] + in.pert->m0;
      e1[k] = W * rate - W * lap_mu[k];
      e2[k] = -W * in.mu[k] + W * (in.tau * rate + in.pair->yosida_bulk(in.eps, u) + in.pert->pi(u) - in.f[k]) -
              W * lap_v[k];
      if (j == 0 || j == g.ny - 1) {
        const std::size_t b = static_cast<std::size_t>(j == 0 ? 0 : 1) * g.nx + i;
        e2[k] += dx * (rate + in.pair->yosida_boundary(in.eps, u) + in.eps * in.v[k] + in.pert->pi_gamma(u) -
                       in.f_gamma[b] + in.lambda * in.w[b]) -
                 dx * lap_g[b];
      }
    }
  }
}

}  // namespace serial
}  // namespace kernels

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Stepper::Impl {
  StripGrid grid;
  std::size_t N = 0;
  std::vector<Triplet> bulk_stiffness;
  std::vector<Triplet> boundary_stiffness;  // on bulk indices of the boundary rows
  std::vector<double> weight;      // bulk quadrature weight per node
  std::vector<double> norm_weight; // weight + boundary weight on boundary rows
  std::vector<long> boundary_of;   // boundary index per bulk node, -1 in the interior
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu[2];
  bool analyzed[2] = {false, false};

  explicit Impl(const StripGrid& g) : grid(g), N(g.bulk_size()) {
    const double dx = g.dx();
    const double dy = g.dy();
    auto edge = [](std::vector<Triplet>& K, std::size_t a, std::size_t b, double c) {
      K.emplace_back(a, a, c);
      K.emplace_back(b, b, c);
      K.emplace_back(a, b, -c);
      K.emplace_back(b, a, -c);
    };
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        edge(bulk_stiffness, g.node(i, j), g.node(i + 1, j), g.bulk_weight(j) / (dx * dx));
        if (j + 1 < g.ny) edge(bulk_stiffness, g.node(i, j), g.node(i, j + 1), dx / dy);
      }
    for (int side = 0; side < 2; ++side) {
      const int j = side == 0 ? 0 : g.ny - 1;
      for (int i = 0; i < g.nx; ++i) edge(boundary_stiffness, g.node(i, j), g.node(i + 1, j), 1.0 / dx);
    }
    weight.resize(N);
    norm_weight.resize(N);
    boundary_of.assign(N, -1);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t k = g.node(i, j);
        weight[k] = g.bulk_weight(j);
        norm_weight[k] = weight[k];
        if (j == 0 || j == g.ny - 1) {
          boundary_of[k] = (j == 0 ? 0 : g.nx) + i;
          norm_weight[k] += dx;
        }
      }
  }
};

namespace {

struct Unknowns {
  std::vector<double> v, mu;
  double lambda = 0.0;
};

double clamp_sign_bound(ActiveBound mode, const ConstraintSpec& C) {
  return mode == ActiveBound::Upper ? C.h_hi : C.h_lo;
}

}  // namespace

Stepper::Stepper(const RunConfig& cfg, double eps, double tau)
    : impl_(std::make_unique<Impl>(cfg.grid)),
      cfg_(cfg),
      eps_(eps),
      tau_(tau),
      pert_(cfg.perturbation()),
      constraint_(cfg.constraint()) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "stepping requires eps > 0");
  if (!(tau >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be >= 0");
  if (!(cfg.u0.grid == cfg.grid) || !(cfg.w_gamma.grid == cfg.grid))
    throw Error(ErrorCode::InvalidArgument, "initial data and weight must live on the configured grid");
}

Stepper::~Stepper() = default;

double Stepper::energy(const CoupledField& v) const { return energy_total(v, cfg_.pair, eps_, pert_); }

SolverState Stepper::initial_state() const {
  SolverState s;
  s.t = 0.0;
  s.v = cfg_.v0();
  s.eps = eps_;
  s.tau = tau_;
  s.xi = CoupledField(cfg_.grid);
  for (std::size_t k = 0; k < s.v.bulk.size(); ++k) s.xi.bulk.values[k] = cfg_.pair.yosida_bulk(eps_, s.v.bulk.values[k] + pert_.m0);
  for (std::size_t k = 0; k < s.v.boundary.size(); ++k)
    s.xi.boundary.values[k] = cfg_.pair.yosida_boundary(eps_, s.v.boundary.values[k] + pert_.m0);
  s.mu = BulkField(cfg_.grid);
  s.h = boundary_mass(s.v.boundary, constraint_);
  if (constraint_.equality()) s.mult.active = ActiveBound::Upper;
  return s;
}

namespace {

struct SystemEval {
  std::vector<double> e1, e2;
  double e3 = 0.0;
};

}  // namespace

SolverState Stepper::solve_mode(const SolverState& s, double dt, ActiveBound mode, StepInfo* info) {
  Impl& im = *impl_;
  const StripGrid& g = cfg_.grid;
  const std::size_t N = im.N;
  const bool constrained = mode != ActiveBound::Inactive;
  const double target = constrained ? clamp_sign_bound(mode, constraint_) : 0.0;
  if (constrained && !std::isfinite(target)) throw Error(ErrorCode::InvalidArgument, "cannot pin the mass to an infinite bound");
  const double dx = g.dx();
  const double m0 = pert_.m0;
  const CoupledField forcing = cfg_.forcing.evaluate(g, s.t + dt);
  const std::vector<double>& w = constraint_.w_gamma.values;

  Unknowns x;
  x.v = s.v.bulk.values;
  x.mu = s.mu.values.size() == N ? s.mu.values : std::vector<double>(N, 0.0);
  x.lambda = constrained ? s.mult.lambda : 0.0;

  auto evaluate = [&](const Unknowns& y, SystemEval& out) {
    kernels::ResidualInputs in;
    in.grid = &g;
    in.pair = &cfg_.pair;
    in.pert = &pert_;
    in.eps = eps_;
    in.tau = tau_;
    in.dt = dt;
    in.lambda = y.lambda;
    in.v = y.v;
    in.v_prev = s.v.bulk.values;
    in.mu = y.mu;
    in.f = forcing.bulk.values;
    in.f_gamma = forcing.boundary.values;
    in.w = w;
    out.e1.resize(N);
    out.e2.resize(N);
    kernels::residual(in, out.e1, out.e2);
    if (constrained) {
      double h = 0.0;
      for (std::size_t b = 0; b < g.boundary_size(); ++b) h += w[b] * y.v[g.boundary_node(b)];
      out.e3 = dx * h - target;
    } else {
      out.e3 = 0.0;
    }
    double r2 = 0.0;
    for (std::size_t k = 0; k < N; ++k)
      r2 += (out.e1[k] * out.e1[k]) / im.weight[k] + out.e2[k] * out.e2[k] / im.norm_weight[k];
    r2 += out.e3 * out.e3 / constraint_.sigma0;
    return std::sqrt(r2);
  };

  const int slot = constrained ? 1 : 0;
  const std::size_t dim = 2 * N + (constrained ? 1 : 0);
  std::vector<Triplet> trip;
  trip.reserve(2 * im.bulk_stiffness.size() + im.boundary_stiffness.size() + 4 * N + 2 * g.boundary_size());
  SpMat J(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(dim));

  SystemEval ev;
  double rnorm = evaluate(x, ev);
  int it = 0;
  const double tol = cfg_.solver.newton_tol;
  while (rnorm > tol) {
    if (it >= cfg_.solver.newton_max_iter) {
      std::ostringstream msg;
      msg << "Newton residual " << rnorm << " above " << tol << " after " << it << " iterations (t = " << s.t + dt
          << ", dt = " << dt << ")";
      throw Error(ErrorCode::NewtonDiverged, msg.str());
    }
    ++it;
    trip.clear();
    for (const Triplet& t : im.bulk_stiffness) {
      trip.emplace_back(t.row(), N + t.col(), t.value());
      trip.emplace_back(N + t.row(), t.col(), t.value());
    }
    for (const Triplet& t : im.boundary_stiffness) trip.emplace_back(N + t.row(), t.col(), t.value());
    for (std::size_t k = 0; k < N; ++k) {
      const double W = im.weight[k];
      const double u = x.v[k] + m0;
      double d = W * (tau_ / dt + cfg_.pair.yosida_bulk_derivative(eps_, u) + pert_.dpi(u));
      if (im.boundary_of[k] >= 0) {
        const std::size_t b = static_cast<std::size_t>(im.boundary_of[k]);
        d += dx * (1.0 / dt + cfg_.pair.yosida_boundary_derivative(eps_, u) + eps_ + pert_.dpi_gamma(u));
        if (constrained) {
          trip.emplace_back(N + k, 2 * N, dx * w[b]);
          trip.emplace_back(2 * N, k, dx * w[b]);
        }
      }
      trip.emplace_back(k, k, W / dt);
      trip.emplace_back(N + k, k, d);
      trip.emplace_back(N + k, N + k, -W);
    }
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
    auto& lu = im.lu[slot];
    if (!im.analyzed[slot]) {
      lu.analyzePattern(J);
      im.analyzed[slot] = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::Solver, "sparse LU factorization failed: " + lu.lastErrorMessage());
    for (std::size_t k = 0; k < N; ++k) {
      rhs[static_cast<Eigen::Index>(k)] = ev.e1[k];
      rhs[static_cast<Eigen::Index>(N + k)] = ev.e2[k];
    }
    if (constrained) rhs[static_cast<Eigen::Index>(2 * N)] = ev.e3;
    const Eigen::VectorXd delta = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !delta.allFinite()) throw Error(ErrorCode::Solver, "sparse LU solve failed");

    double alpha = 1.0;
    Unknowns trial;
    SystemEval tev;
    double tnorm = 0.0;
    for (int ls = 0; ls < 30; ++ls) {
      trial.v = x.v;
      trial.mu = x.mu;
      for (std::size_t k = 0; k < N; ++k) {
        trial.v[k] -= alpha * delta[static_cast<Eigen::Index>(k)];
        trial.mu[k] -= alpha * delta[static_cast<Eigen::Index>(N + k)];
      }
      trial.lambda = constrained ? x.lambda - alpha * delta[static_cast<Eigen::Index>(2 * N)] : 0.0;
      tnorm = evaluate(trial, tev);
      if (std::isfinite(tnorm) && tnorm < rnorm) break;
      alpha *= 0.5;
    }
    if (!(std::isfinite(tnorm) && tnorm < rnorm)) {
      std::ostringstream msg;
      msg << "line search stalled at residual " << rnorm << " (t = " << s.t + dt << ", dt = " << dt << ")";
      throw Error(ErrorCode::NewtonDiverged, msg.str());
    }
    x = std::move(trial);
    ev = std::move(tev);
    rnorm = tnorm;
  }

  SolverState out;
  out.t = s.t + dt;
  out.eps = eps_;
  out.tau = tau_;
  out.step_index = s.step_index + 1;
  out.v = CoupledField::from_bulk(BulkField(g, x.v));
  const double drift = mean_bulk(out.v.bulk);
  if (std::abs(drift) > cfg_.solver.tol_mean) out.v = project_P(out.v);
  out.mu = BulkField(g, x.mu);
  out.xi = CoupledField(g);
  for (std::size_t k = 0; k < N; ++k) out.xi.bulk.values[k] = cfg_.pair.yosida_bulk(eps_, out.v.bulk.values[k] + m0);
  for (std::size_t b = 0; b < g.boundary_size(); ++b)
    out.xi.boundary.values[b] = cfg_.pair.yosida_boundary(eps_, out.v.boundary.values[b] + m0);
  out.mult.lambda = x.lambda;
  out.mult.omega = mean_bulk(out.mu);
  out.mult.active = mode;
  out.h = boundary_mass(out.v.boundary, constraint_);
  if (info) {
    info->newton_iterations += it;
    info->residual = rnorm;
  }
  return out;
}

double Stepper::residual_norm(const SolverState& from, const SolverState& to) const {
  const Impl& im = *impl_;
  const StripGrid& g = cfg_.grid;
  const double dt = to.t - from.t;
  const CoupledField forcing = cfg_.forcing.evaluate(g, to.t);
  kernels::ResidualInputs in;
  in.grid = &g;
  in.pair = &cfg_.pair;
  in.pert = &pert_;
  in.eps = eps_;
  in.tau = tau_;
  in.dt = dt;
  in.lambda = to.mult.lambda;
  in.v = to.v.bulk.values;
  in.v_prev = from.v.bulk.values;
  in.mu = to.mu.values;
  in.f = forcing.bulk.values;
  in.f_gamma = forcing.boundary.values;
  in.w = constraint_.w_gamma.values;
  std::vector<double> e1(im.N), e2(im.N);
  kernels::residual(in, e1, e2);
  double r2 = 0.0;
  for (std::size_t k = 0; k < im.N; ++k) r2 += e1[k] * e1[k] / im.weight[k] + e2[k] * e2[k] / im.norm_weight[k];
  if (to.mult.active != ActiveBound::Inactive) {
    const double e3 = boundary_mass(to.v.boundary, constraint_) - clamp_sign_bound(to.mult.active, constraint_);
    r2 += e3 * e3 / constraint_.sigma0;
  }
  return std::sqrt(r2);
}

SolverState Stepper::advance(const SolverState& s, double dt, StepInfo* info) {
  const double tol = cfg_.solver.tol_kkt;
  const bool has_lo = std::isfinite(constraint_.h_lo);
  const bool has_hi = std::isfinite(constraint_.h_hi);
  ActiveBound mode = s.mult.active;
  if (constraint_.equality()) mode = ActiveBound::Upper;
  if ((mode == ActiveBound::Upper && !has_hi) || (mode == ActiveBound::Lower && !has_lo)) mode = ActiveBound::Inactive;
  int transitions = 0;
  for (;;) {
    SolverState r = solve_mode(s, dt, mode, info);
    if (constraint_.equality()) return r;
    ActiveBound next = mode;
    if (mode == ActiveBound::Inactive) {
      if (has_hi && r.h > constraint_.h_hi + tol) next = ActiveBound::Upper;
      else if (has_lo && r.h < constraint_.h_lo - tol) next = ActiveBound::Lower;
      else return r;
    } else if (mode == ActiveBound::Upper) {
      if (r.mult.lambda >= -tol) return r;
      next = ActiveBound::Inactive;
    } else {
      if (r.mult.lambda <= tol) return r;
      next = ActiveBound::Inactive;
    }
    if (info) ++info->active_set_cycles;
    if (++transitions > 3) {
      std::ostringstream msg;
      msg << "active set cycling at step " << s.step_index + 1 << " (t = " << s.t + dt << ")";
      throw Error(ErrorCode::ActiveSetCycle, msg.str());
    }
    mode = next;
  }
}

std::vector<TrajectoryPoint> Stepper::step_events(const SolverState& s, double t_next) {
  const double dt = t_next - s.t;
  TrajectoryPoint last;
  last.state = advance(s, dt, &last.info);
  last.dt = dt;
  last.on_grid = true;
  const ActiveBound mode = last.state.mult.active;
  if (!cfg_.solver.locate_events || constraint_.equality() || s.mult.active != ActiveBound::Inactive ||
      mode == ActiveBound::Inactive)
    return {last};

  const double bound = clamp_sign_bound(mode, constraint_);
  const double sign = mode == ActiveBound::Upper ? 1.0 : -1.0;
  const double htol = 1e-12 * (1.0 + std::abs(bound));
  const double g0 = sign * (s.h - bound);
  if (g0 >= -htol) return {last};

  StepInfo free_info;
  auto gap = [&](double theta, SolverState& st) {
    st = solve_mode(s, theta * dt, ActiveBound::Inactive, &free_info);
    return sign * (st.h - bound);
  };
  SolverState st;
  double lo = 0.0, glo = g0;
  double hi = 1.0, ghi = gap(1.0, st);
  if (ghi <= 0.0) return {last};
  double theta = 1.0;
  int side = 0;
  for (int it = 0; it < 100; ++it) {
    theta = lo - glo * (hi - lo) / (ghi - glo);
    if (!(theta > lo && theta < hi)) theta = 0.5 * (lo + hi);
    const double gm = gap(theta, st);
    if (std::abs(gm) <= htol) break;
    if (gm < 0.0) {
      lo = theta;
      glo = gm;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      hi = theta;
      ghi = gm;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
    if (hi - lo < 1e-15) break;
  }
  if (theta * dt < 1e-10 || (1.0 - theta) * dt < 1e-10) return {last};

  TrajectoryPoint mid;
  mid.state = st;
  mid.dt = theta * dt;
  mid.on_grid = false;
  mid.info = free_info;
  TrajectoryPoint rest;
  rest.state = advance(mid.state, t_next - mid.state.t, &rest.info);
  rest.state.t = t_next;
  rest.dt = t_next - mid.state.t;
  rest.on_grid = true;
  return {mid, rest};
}

std::vector<TrajectoryPoint> Stepper::step_halving(const SolverState& s, double t_next, int level) {
  try {
    return step_events(s, t_next);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NewtonDiverged || level >= cfg_.solver.max_halvings) throw;
  }
  const double t_mid = s.t + 0.5 * (t_next - s.t);
  std::vector<TrajectoryPoint> a = step_halving(s, t_mid, level + 1);
  for (TrajectoryPoint& p : a) p.on_grid = false;
  std::vector<TrajectoryPoint> b = step_halving(a.back().state, t_next, level + 1);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<TrajectoryPoint> Stepper::step(const SolverState& s, double t_next) {
  std::vector<TrajectoryPoint> pts = step_halving(s, t_next, 0);
  pts.back().state.t = t_next;
  for (TrajectoryPoint& p : pts) p.energy = energy(p.state.v);
  return pts;
}

SolverState step(const SolverState& s, const RunConfig& cfg) {
  Stepper st(cfg, s.eps > 0.0 ? s.eps : cfg.eps(), s.tau);
  return st.step(s, s.t + cfg.dt).back().state;
}

Trajectory run(const RunConfig& cfg, const RunOptions& opts) {
  check_initial_data(cfg);
  const double eps = opts.eps.value_or(cfg.eps());
  const double tau = opts.tau.value_or(cfg.tau);
  Stepper st(cfg, eps, tau);
  Trajectory traj;
  traj.eps = eps;
  traj.tau = tau;
  traj.m0 = cfg.m0();
  TrajectoryPoint p0;
  p0.state = st.initial_state();
  p0.energy = st.energy(p0.state.v);
  if (opts.on_point) opts.on_point(p0);
  traj.points.push_back(std::move(p0));
  const int n = cfg.steps();
  for (int k = 1; k <= n; ++k) {
    const double t_next = k * cfg.dt;
    std::vector<TrajectoryPoint> pts = st.step(traj.points.back().state, t_next);
    for (TrajectoryPoint& p : pts) {
      if (opts.on_point) opts.on_point(p);
      traj.points.push_back(std::move(p));
    }
  }
  return traj;
}

int study_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CHDBC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) n = v;
  }
  return std::max(1, n);
}

namespace {

template <class Fn>
void parallel_members(std::size_t count, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(study_threads()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

void fill_report(ContinuationReport& rep) {
  const std::size_t n = rep.runs.size();
  for (const Trajectory& tr : rep.runs) {
    double exc = 0.0;
    double vp2 = 0.0;
    for (std::size_t k = 0; k < tr.points.size(); ++k) {
      const SolverState& s = tr.points[k].state;
      for (double v : s.v.bulk.values) exc = std::max(exc, std::abs(v + tr.m0) - 1.0);
      for (double v : s.v.boundary.values) exc = std::max(exc, std::abs(v + tr.m0) - 1.0);
      if (k > 0) {
        const double dt = tr.points[k].dt;
        BulkField d = s.v.bulk - tr.points[k - 1].state.v.bulk;
        const double nrm = norm_H0(d) / dt;
        vp2 += dt * nrm * nrm;
      }
    }
    rep.excursion.push_back(std::max(0.0, exc));
    rep.tau_vprime.push_back(tr.tau * std::sqrt(vp2));
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto a = rep.runs[k].grid_points();
    const auto b = rep.runs[k + 1].grid_points();
    const std::size_t m = std::min(a.size(), b.size());
    double sup = 0.0, l2 = 0.0, xi = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const CoupledField d = a[i]->state.v - b[i]->state.v;
      sup = std::max(sup, norm_H0_pair(d));
      if (i > 0) {
        const double dt = a[i]->state.t - a[i - 1]->state.t;
        const double v0 = norm_V0_pair(d);
        const double x0 = norm_H0_pair(a[i]->state.xi - b[i]->state.xi);
        l2 += dt * v0 * v0;
        xi += dt * x0 * x0;
      }
    }
    rep.diff_sup_H0.push_back(sup);
    rep.diff_L2_V0.push_back(std::sqrt(l2));
    rep.diff_xi_L2.push_back(std::sqrt(xi));
  }
}

}  // namespace

ContinuationReport continuation_eps(const RunConfig& cfg) {
  for (std::size_t k = 0; k + 1 < cfg.eps_schedule.size(); ++k)
    if (!(cfg.eps_schedule[k + 1] < cfg.eps_schedule[k]))
      throw Error(ErrorCode::InvalidArgument, "eps_schedule must be strictly decreasing");
  ContinuationReport rep;
  rep.params = cfg.eps_schedule;
  rep.runs.resize(rep.params.size());
  parallel_members(rep.params.size(), [&](std::size_t k) {
    RunOptions o;
    o.eps = rep.params[k];
    rep.runs[k] = run(cfg, o);
  });
  fill_report(rep);
  return rep;
}

ContinuationReport continuation_tau(const RunConfig& cfg, const std::vector<double>& tau_schedule) {
  for (std::size_t k = 0; k + 1 < tau_schedule.size(); ++k)
    if (!(tau_schedule[k + 1] < tau_schedule[k]))
      throw Error(ErrorCode::InvalidArgument, "tau schedule must be strictly decreasing");
  ContinuationReport rep;
  rep.params = tau_schedule;
  rep.runs.resize(rep.params.size());
  parallel_members(rep.params.size(), [&](std::size_t k) {
    RunOptions o;
    o.tau = rep.params[k];
    rep.runs[k] = run(cfg, o);
  });
  fill_report(rep);
  return rep;
}

}  // namespace chdbc
