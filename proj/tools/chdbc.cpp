// chdbc: command-line front end.
//
//   chdbc run        --config FILE --out DIR [--set section.key=value ...]
//   chdbc eps-study  --config FILE --out DIR
//   chdbc tau-study  --config FILE --out DIR
//   chdbc stability  --config FILE --out DIR
//   chdbc validate   --config FILE --out DIR
//   chdbc recover    --config FILE --out DIR [--from CHECKPOINT_DIR]
//
// Exit status: 0 success, 1 solver error or failed check, 2 config or usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chdbc/checkpoint.hpp"
#include "chdbc/config.hpp"
#include "chdbc/diagnostics.hpp"
#include "chdbc/error.hpp"
#include "chdbc/monotone.hpp"
#include "chdbc/operators.hpp"
#include "chdbc/stepper.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace chdbc;

namespace {

struct ConfigError {
  std::string message;
};

struct Options {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  std::string dt, eps, tau;
  int checkpoints = -1;
  std::string from;
};

LoadedConfig load(const Options& o) {
  std::vector<std::pair<std::string, std::string>> overrides;
  try {
    for (const auto& s : o.sets) overrides.push_back(parse_override(s));
    if (!o.dt.empty()) overrides.emplace_back("time.dt", o.dt);
    if (!o.eps.empty()) overrides.emplace_back("time.eps_schedule", o.eps);
    if (!o.tau.empty()) overrides.emplace_back("time.tau", o.tau);
    if (o.checkpoints >= 0) overrides.emplace_back("output.checkpoint_every", std::to_string(o.checkpoints));
    if (o.config.empty()) return parse_config_text("", overrides);
    return parse_config(o.config, overrides);
  } catch (const Error& e) {
    throw ConfigError{e.what()};
  }
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json config_echo(const LoadedConfig& lc) {
  json j;
  j["values"] = json::object();
  for (const auto& [k, v] : lc.values) j["values"][k] = v;
  j["overrides"] = json::array();
  for (const auto& [k, v] : lc.overrides) j["overrides"].push_back({{"key", k}, {"value", v}});
  j["a7_compliant"] = lc.run.tau > 0.0 || lc.run.forcing.a7;
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  return os;
}

void warn_a7(const RunConfig& cfg, double tau) {
  if (tau == 0.0 && !cfg.forcing.a7)
    std::cerr << "warning: tau = 0 with forcing not declared in the a7 class (forcing.a7 = false)\n";
}

// Streams one trajectory into dir/series.csv (and checkpoints) while it runs.
struct RunWriter {
  RunWriter(const fs::path& dir, const RunConfig& cfg, double eps, double tau)
      : dir_(dir), cfg_(cfg), builder_(cfg, eps, tau), csv_(open_out(dir / "series.csv")) {
    write_csv_header(csv_, builder_.columns());
    if (cfg.output.checkpoint_every > 0) fs::create_directories(dir / "checkpoints");
  }

  void operator()(const TrajectoryPoint& p) {
    const bool first = !has_prev_;
    if (p.on_grid) ++grid_count_;
    const bool last = p.on_grid && std::abs(p.state.t - cfg_.T) <= 1e-9 * (1.0 + cfg_.T);
    const bool keep = first || !p.on_grid || last || (grid_count_ - 1) % cfg_.output.store_every == 0;
    std::vector<double> row = builder_.row(has_prev_ ? &prev_ : nullptr, p);
    if (keep) write_csv_row(csv_, row);
    const int every = cfg_.output.checkpoint_every;
    if (every > 0 && p.state.step_index % every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06ld.txt", p.state.step_index);
      write_checkpoint((dir_ / "checkpoints" / name).string(), p.state, cfg_.m0());
    }
    max_residual_ = std::max(max_residual_, p.info.residual);
    max_newton_ = std::max(max_newton_, p.info.newton_iterations);
    prev_ = p;
    has_prev_ = true;
  }

  const TrajectoryPoint& last() const { return prev_; }
  const std::vector<std::string>& columns() const { return builder_.columns(); }
  const std::vector<std::string>& descriptions() const { return builder_.descriptions(); }

  double max_residual_ = 0.0;
  int max_newton_ = 0;

 private:
  fs::path dir_;
  RunConfig cfg_;
  SeriesBuilder builder_;
  std::ofstream csv_;
  TrajectoryPoint prev_;
  bool has_prev_ = false;
  long grid_count_ = 0;
};

json final_state(const TrajectoryPoint& p) {
  const SolverState& s = p.state;
  return {{"t", s.t},
          {"step", s.step_index},
          {"mean_u", s.v.bulk.values.empty() ? 0.0 : mean_bulk(s.v.bulk)},
          {"h", finite_or_null(s.h)},
          {"lambda", s.mult.lambda},
          {"omega", s.mult.omega},
          {"active", to_string(s.mult.active)},
          {"energy", p.energy}};
}

int cmd_run(const Options& o) {
  const LoadedConfig lc = load(o);
  const RunConfig& cfg = lc.run;
  warn_a7(cfg, cfg.tau);
  fs::create_directories(o.out);
  RunWriter writer(o.out, cfg, cfg.eps(), cfg.tau);
  RunOptions ro;
  ro.on_point = [&](const TrajectoryPoint& p) { writer(p); };

  json summary;
  summary["command"] = "run";
  summary["config"] = config_echo(lc);
  summary["eps"] = cfg.eps();
  summary["tau"] = cfg.tau;
  summary["m0"] = cfg.m0();
  json cols = json::object();
  for (std::size_t k = 0; k < writer.columns().size(); ++k) cols[writer.columns()[k]] = writer.descriptions()[k];
  summary["columns"] = cols;

  int status = 0;
  try {
    const Trajectory traj = run(cfg, ro);
    const Table mon = bound_monitors(traj, cfg);
    json maxima = json::object();
    for (const auto& [k, v] : monitor_maxima(mon)) maxima[k] = finite_or_null(v);
    summary["monitor_maxima"] = maxima;
    summary["status"] = "ok";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    summary["status"] = to_string(e.code());
    summary["error"] = e.what();
    status = 1;
  }
  summary["final"] = final_state(writer.last());
  summary["max_residual"] = writer.max_residual_;
  summary["max_newton_iterations"] = writer.max_newton_;
  write_json(fs::path(o.out) / "summary.json", summary);
  return status;
}

json continuation_json(const ContinuationReport& rep, const char* param) {
  json j;
  j["parameter"] = param;
  j["values"] = rep.params;
  j["diff_sup_H0"] = rep.diff_sup_H0;
  j["diff_L2_V0"] = rep.diff_L2_V0;
  j["diff_xi_L2"] = rep.diff_xi_L2;
  j["excursion"] = rep.excursion;
  j["tau_vprime"] = rep.tau_vprime;
  auto decreasing = [](const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
      if (!(v[k] < v[k - 1])) return false;
    return true;
  };
  j["cauchy_decreasing"] = decreasing(rep.diff_sup_H0) && decreasing(rep.diff_L2_V0);
  return j;
}

void write_members(const fs::path& out, const ContinuationReport& rep, const RunConfig& cfg, const char* prefix,
                   json& report) {
  json members = json::array();
  std::map<std::string, std::vector<double>> maxima_by_key;
  for (std::size_t k = 0; k < rep.runs.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "%s_%02zu", prefix, k);
    const fs::path dir = out / name;
    fs::create_directories(dir);
    {
      std::ofstream os = open_out(dir / "series.csv");
      write_csv(os, run_series(rep.runs[k], cfg));
    }
    json m;
    m["directory"] = name;
    m["eps"] = rep.runs[k].eps;
    m["tau"] = rep.runs[k].tau;
    json mx = json::object();
    for (const auto& [key, v] : monitor_maxima(bound_monitors(rep.runs[k], cfg))) {
      mx[key] = finite_or_null(v);
      maxima_by_key[key].push_back(v);
    }
    m["monitor_maxima"] = mx;
    members.push_back(m);
  }
  report["members"] = members;
  json ratios = json::object();
  for (const auto& [key, vals] : maxima_by_key) {
    const double lo = *std::min_element(vals.begin(), vals.end());
    const double hi = *std::max_element(vals.begin(), vals.end());
    ratios[key] = lo > 0.0 ? json(hi / lo) : (hi == 0.0 ? json(1.0) : json(nullptr));
  }
  report["monitor_max_ratio"] = ratios;
}

int cmd_eps_study(const Options& o) {
  const LoadedConfig lc = load(o);
  const RunConfig& cfg = lc.run;
  warn_a7(cfg, cfg.tau);
  fs::create_directories(o.out);
  const ContinuationReport rep = continuation_eps(cfg);
  json report = continuation_json(rep, "eps");
  report["config"] = config_echo(lc);
  write_members(o.out, rep, cfg, "eps", report);
  write_json(fs::path(o.out) / "report.json", report);
  return 0;
}

int cmd_tau_study(const Options& o) {
  const LoadedConfig lc = load(o);
  const RunConfig& cfg = lc.run;
  for (double t : lc.study.tau_schedule) warn_a7(cfg, t);
  fs::create_directories(o.out);
  const ContinuationReport rep = continuation_tau(cfg, lc.study.tau_schedule);
  json report = continuation_json(rep, "tau");
  report["config"] = config_echo(lc);
  write_members(o.out, rep, cfg, "tau", report);
  write_json(fs::path(o.out) / "report.json", report);
  return 0;
}

int cmd_stability(const Options& o) {
  const LoadedConfig lc = load(o);
  const RunConfig& cfg = lc.run;
  fs::create_directories(o.out);
  const StabilityReport rep = stability_experiment(cfg, default_perturbation(cfg.grid), lc.study.delta);
  {
    std::ofstream os = open_out(fs::path(o.out) / "stability.csv");
    Table t;
    t.columns = {"t", "lhs", "c_hat"};
    for (std::size_t k = 0; k < rep.t.size(); ++k) t.rows.push_back({rep.t[k], rep.lhs[k], rep.c_hat[k]});
    write_csv(os, t);
  }
  json j;
  j["command"] = "stability";
  j["config"] = config_echo(lc);
  j["delta"] = lc.study.delta;
  j["rhs0"] = rep.rhs0;
  j["c_hat_T"] = finite_or_null(rep.c_hat_T);
  j["c_hat_sup"] = finite_or_null(rep.c_hat_sup);
  j["fit_rate"] = finite_or_null(rep.fit_rate);
  j["envelope_rate"] = finite_or_null(rep.envelope_rate);
  j["reclamped"] = rep.reclamped;
  j["inadmissible"] = rep.inadmissible;
  if (!rep.note.empty()) j["note"] = rep.note;
  write_json(fs::path(o.out) / "summary.json", j);
  return std::isfinite(rep.c_hat_T) ? 0 : 1;
}

json violations_json(const std::vector<Violation>& vs) {
  json a = json::array();
  for (std::size_t k = 0; k < std::min<std::size_t>(vs.size(), 20); ++k)
    a.push_back({{"r", vs[k].r}, {"check", vs[k].check}, {"magnitude", vs[k].magnitude}});
  return a;
}

CoupledField random_pair(const StripGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a = U(rng), b = U(rng), c = U(rng);
  const double Lx = g.Lx, Ly = g.Ly;
  return CoupledField::from_bulk(BulkField::from_function(g, [&](double x, double y) {
    return a * std::cos(2 * std::numbers::pi * x / Lx) + b * std::cos(std::numbers::pi * y / Ly) +
           c * std::sin(2 * std::numbers::pi * x / Lx) * y * y;
  }));
}

int cmd_validate(const Options& o) {
  const LoadedConfig lc = load(o);
  const RunConfig& cfg = lc.run;
  fs::create_directories(o.out);
  bool pass = true;
  json j;
  j["command"] = "validate";
  j["config"] = config_echo(lc);

  const A1Report a1b = validate_A1(cfg.pair.bulk);
  const A1Report a1g = validate_A1(cfg.pair.boundary);
  j["potential_bulk"] = {{"pass", a1b.pass}, {"violations", violations_json(a1b.violations)}};
  j["potential_boundary"] = {{"pass", a1g.pass}, {"violations", violations_json(a1g.violations)}};
  pass = pass && a1b.pass && a1g.pass;
  if (a1b.pass && a1g.pass) {
    const std::vector<double> lattice = default_lattice(cfg.pair);
    const A5Report a5 = validate_A5(cfg.pair, lattice);
    j["pair_bounds"] = {{"pass", a5.pass},
               {"growth_bulk_ok", a5.growth_bulk_ok},
               {"growth_boundary_ok", a5.growth_boundary_ok},
               {"compat_ok", a5.compat_ok},
               {"eps_level_ok", a5.eps_level_ok},
               {"tight_c0_growth", finite_or_null(a5.tight_c0_growth)},
               {"tight_c0_compat", finite_or_null(a5.tight_c0_compat)},
               {"tight_rho", finite_or_null(a5.tight_rho)},
               {"violations", violations_json(a5.violations)}};
    pass = pass && a5.pass;
  }
  const PerturbationSpec P = cfg.perturbation();
  const bool lip = check_lipschitz(P);
  j["perturbation_lipschitz"] = lip;
  pass = pass && lip;

  // Operator properties on random smooth pairs.
  std::mt19937_64 rng(cfg.solver.seed);
  const StripGrid& g = cfg.grid;
  double green = 0.0, inverse = 0.0, mono = std::numeric_limits<double>::infinity();
  const double eps = cfg.eps();
  for (int k = 0; k < 5; ++k) {
    const CoupledField f = random_pair(g, rng);
    const CoupledField h = random_pair(g, rng);
    const double lhs = inner_bulk(laplace_bulk(f.bulk, normal_derivative(f.bulk)), h.bulk) + inner_grad_bulk(f.bulk, h.bulk) -
                       inner_boundary(normal_derivative(f.bulk), h.boundary);
    green = std::max(green, std::abs(lhs));
    const BulkField z = project_P0(f.bulk);
    const BulkField back = apply_F(invert_F(z));
    double err = 0.0;
    for (std::size_t n = 0; n < z.size(); ++n) err = std::max(err, std::abs(back.values[n] - z.values[n]));
    inverse = std::max(inverse, err);
    const CoupledField d = f - h;
    const double m = pairing(apply_dphi_eps(f, cfg.pair, eps, cfg.m0()) - apply_dphi_eps(h, cfg.pair, eps, cfg.m0()), d);
    mono = std::min(mono, m);
  }
  j["green_identity_max"] = green;
  j["neumann_inverse_max"] = inverse;
  j["dphi_monotonicity_min"] = mono;
  const bool ops_ok = green <= 1e-8 && inverse <= 1e-8 && mono >= -1e-10;
  j["operators_pass"] = ops_ok;
  pass = pass && ops_ok;
  j["pass"] = pass;
  write_json(fs::path(o.out) / "validate.json", j);
  if (!pass) std::cerr << "validate: one or more checks failed, see validate.json\n";
  return pass ? 0 : 1;
}

int cmd_recover(const Options& o) {
  const LoadedConfig lc = load(o);
  const RunConfig& cfg = lc.run;
  const fs::path from = o.from.empty() ? fs::path(o.out) / "checkpoints" : fs::path(o.from);
  if (!fs::is_directory(from)) throw Error(ErrorCode::Io, "no checkpoint directory '" + from.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(from))
    if (e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.size() < 2) throw Error(ErrorCode::Io, "need at least two checkpoints in '" + from.string() + "'");
  std::vector<SolverState> states;
  for (const auto& f : files) states.push_back(read_checkpoint(f.string()).state);
  RunConfig rc = cfg;
  rc.eps_schedule = {states.front().eps};
  rc.tau = states.front().tau;
  const RecoveryReport rep = recovery_check(states, rc);

  fs::create_directories(o.out);
  json j;
  j["command"] = "recover";
  j["config"] = config_echo(lc);
  j["checkpoints"] = files.size();
  j["pairs_checked"] = rep.steps.size();
  j["max_weak"] = rep.max_weak;
  j["max_interior"] = rep.max_interior;
  j["max_boundary"] = rep.max_boundary;
  j["max_lambda_gap"] = rep.max_lambda_gap;
  j["tolerance"] = rep.tolerance;
  j["failing_steps"] = rep.failing_steps;
  j["pass"] = rep.pass;
  write_json(fs::path(o.out) / "recovery.json", j);
  if (rep.steps.empty()) std::cerr << "recover: no consecutive checkpoint pairs (use checkpoint_every = 1)\n";
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cahn-Hilliard solver with dynamic boundary conditions and a boundary mass constraint", "chdbc"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "configuration file");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--set", o.sets, "override section.key=value (repeatable)");
    sub->add_option("--dt", o.dt, "shortcut for time.dt");
    sub->add_option("--eps", o.eps, "shortcut for time.eps_schedule");
    sub->add_option("--tau", o.tau, "shortcut for time.tau");
    sub->add_option("--checkpoints", o.checkpoints, "shortcut for output.checkpoint_every");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "simulate one trajectory");
  CLI::App* eps_cmd = app.add_subcommand("eps-study", "continuation over time.eps_schedule");
  CLI::App* tau_cmd = app.add_subcommand("tau-study", "continuation over study.tau_schedule");
  CLI::App* stab_cmd = app.add_subcommand("stability", "continuous dependence on the initial data");
  CLI::App* val_cmd = app.add_subcommand("validate", "check potentials and operators");
  CLI::App* rec_cmd = app.add_subcommand("recover", "recovery check on stored checkpoints");
  for (CLI::App* s : {run_cmd, eps_cmd, tau_cmd, stab_cmd, val_cmd, rec_cmd}) add_common(s);
  rec_cmd->add_option("--from", o.from, "checkpoint directory (default OUT/checkpoints)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run_cmd) return cmd_run(o);
    if (*eps_cmd) return cmd_eps_study(o);
    if (*tau_cmd) return cmd_tau_study(o);
    if (*stab_cmd) return cmd_stability(o);
    if (*val_cmd) return cmd_validate(o);
    if (*rec_cmd) return cmd_recover(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.message << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
