#include "chdbc/config.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "chdbc/error.hpp"
#include "chdbc/expression.hpp"

namespace chdbc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;  // 0 for defaults and overrides
};

[[noreturn]] void bad_value(const std::string& key, const Entry& e, const std::string& why) {
  std::ostringstream msg;
  if (e.line > 0) msg << "line " << e.line << ": ";
  else msg << "override: ";
  msg << key << " = '" << e.value << "': " << why;
  throw Error(ErrorCode::Parse, msg.str());
}

double to_double(const std::string& key, const Entry& e) {
  const std::string v = trim(e.value);
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    const Expression ex = Expression::parse(v);
    if (!ex.constant()) bad_value(key, e, "expected a number");
    return ex(0.0, 0.0, 0.0);
  } catch (const Error&) {
    bad_value(key, e, "expected a number");
  }
}

long to_int(const std::string& key, const Entry& e) {
  const double d = to_double(key, e);
  if (d != std::floor(d) || std::abs(d) > 1e15) bad_value(key, e, "expected an integer");
  return static_cast<long>(d);
}

bool to_bool(const std::string& key, const Entry& e) {
  const std::string v = trim(e.value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, e, "expected true or false");
}

Expression to_expr(const std::string& key, const Entry& e) {
  try {
    return Expression::parse(trim(e.value));
  } catch (const Error& err) {
    bad_value(key, e, err.what());
  }
}

}  // namespace

const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> d = {
      {"grid.Lx", "6.283185307179586"},
      {"grid.Ly", "1"},
      {"grid.nx", "32"},
      {"grid.ny", "33"},
      {"potential.bulk", "quartic"},
      {"potential.boundary", "quartic"},
      {"potential.rho", "1"},
      {"potential.c0", "2"},
      {"perturbation.pi", "linear:-1"},
      {"perturbation.pi_gamma", ""},
      {"initial.u0", "0"},
      {"constraint.w_gamma", "uniform"},
      {"constraint.k_lo", "-inf"},
      {"constraint.k_hi", "inf"},
      {"forcing.f", "0"},
      {"forcing.f_gamma", "0"},
      {"forcing.a7", "true"},
      {"time.dt", "1e-3"},
      {"time.T", "0.1"},
      {"time.eps_schedule", "1e-2"},
      {"time.tau", "1"},
      {"solver.newton_tol", "1e-10"},
      {"solver.newton_max_iter", "50"},
      {"solver.tol_kkt", "1e-8"},
      {"solver.tol_mean", "1e-10"},
      {"solver.max_halvings", "5"},
      {"solver.locate_events", "true"},
      {"solver.seed", "12345"},
      {"output.checkpoint_every", "0"},
      {"output.store_every", "1"},
      {"study.tau_schedule", "1,0.1,0.01,0"},
      {"study.delta", "1e-3"},
  };
  return d;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string v = trim(item);
    if (v.empty()) continue;
    const Entry e{v, 0};
    out.push_back(to_double("list", e));
  }
  return out;
}

std::pair<std::string, std::string> parse_override(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::Parse, "override '" + arg + "' is not section.key=value");
  const std::string key = trim(arg.substr(0, eq));
  if (!config_defaults().count(key)) throw Error(ErrorCode::Parse, "override: unknown key '" + key + "'");
  return {key, trim(arg.substr(eq + 1))};
}

LoadedConfig parse_config_text(const std::string& text,
                               const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::map<std::string, Entry> entries;
  for (const auto& [k, v] : config_defaults()) entries[k] = Entry{v, 0};

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& [k, v] : config_defaults())
        if (k.rfind(section + ".", 0) == 0) known = true;
      if (!known) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": key outside a section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    if (!entries.count(key)) throw Error(ErrorCode::Parse, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    entries[key] = Entry{trim(line.substr(eq + 1)), lineno};
  }
  LoadedConfig out;
  for (const auto& [k, v] : overrides) {
    if (!entries.count(k)) throw Error(ErrorCode::Parse, "override: unknown key '" + k + "'");
    entries[k] = Entry{v, 0};
    out.overrides.emplace_back(k, v);
  }
  for (const auto& [k, e] : entries) out.values[k] = e.value;

  auto num = [&](const std::string& k) { return to_double(k, entries[k]); };
  auto str = [&](const std::string& k) { return trim(entries[k].value); };

  RunConfig& cfg = out.run;
  try {
    cfg.grid = StripGrid(num("grid.Lx"), num("grid.Ly"), static_cast<int>(to_int("grid.nx", entries["grid.nx"])),
                         static_cast<int>(to_int("grid.ny", entries["grid.ny"])));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    throw Error(ErrorCode::Parse, std::string("[grid]: ") + e.what());
  }
  const StripGrid& g = cfg.grid;

  cfg.bulk_preset = str("potential.bulk");
  cfg.boundary_preset = str("potential.boundary");
  try {
    cfg.pair = GraphPair{graph_from_preset(cfg.bulk_preset), graph_from_preset(cfg.boundary_preset),
                         num("potential.rho"), num("potential.c0")};
  } catch (const Error& e) {
    const std::string key = "potential.bulk";
    bad_value(key, entries[key], e.what());
  }
  if (!(cfg.pair.rho > 0.0)) bad_value("potential.rho", entries["potential.rho"], "must be positive");
  if (!(cfg.pair.c0 > 0.0)) bad_value("potential.c0", entries["potential.c0"], "must be positive");

  cfg.perturbation_preset = str("perturbation.pi");
  cfg.perturbation_gamma_preset = str("perturbation.pi_gamma");
  try {
    (void)perturbation_from_preset(cfg.perturbation_preset);
    if (!cfg.perturbation_gamma_preset.empty()) (void)perturbation_from_preset(cfg.perturbation_gamma_preset);
  } catch (const Error& e) {
    bad_value("perturbation.pi", entries["perturbation.pi"], e.what());
  }

  cfg.u0_text = str("initial.u0");
  const Expression u0 = to_expr("initial.u0", entries["initial.u0"]);
  if (u0.depends_on_t()) bad_value("initial.u0", entries["initial.u0"], "initial data cannot depend on t");
  cfg.u0 = BulkField::from_function(g, [&](double x, double y) { return u0(x, y, 0.0); });
  if (!cfg.u0.finite()) bad_value("initial.u0", entries["initial.u0"], "not finite on the grid");

  cfg.w_gamma_text = str("constraint.w_gamma");
  if (cfg.w_gamma_text == "uniform" || cfg.w_gamma_text == "bottom_only") {
    cfg.w_gamma = weight_from_preset(g, cfg.w_gamma_text);
  } else {
    const Expression w = to_expr("constraint.w_gamma", entries["constraint.w_gamma"]);
    cfg.w_gamma = BoundaryField::from_function(g, [&](double x, int side) { return w(x, g.side_y(side), 0.0); });
  }
  cfg.k_lo = num("constraint.k_lo");
  cfg.k_hi = num("constraint.k_hi");

  cfg.forcing.f_text = str("forcing.f");
  cfg.forcing.f_gamma_text = str("forcing.f_gamma");
  const Expression f = to_expr("forcing.f", entries["forcing.f"]);
  const Expression fg = to_expr("forcing.f_gamma", entries["forcing.f_gamma"]);
  if (!(f.constant() && f(0, 0, 0) == 0.0)) cfg.forcing.f = [f](double x, double y, double t) { return f(x, y, t); };
  if (!(fg.constant() && fg(0, 0, 0) == 0.0)) {
    const double Ly = g.Ly;
    cfg.forcing.f_gamma = [fg, Ly](double x, int side, double t) { return fg(x, side == 0 ? 0.0 : Ly, t); };
  }
  cfg.forcing.a7 = to_bool("forcing.a7", entries["forcing.a7"]);

  cfg.dt = num("time.dt");
  cfg.T = num("time.T");
  if (!(cfg.dt > 0.0)) bad_value("time.dt", entries["time.dt"], "must be positive");
  if (!(cfg.T >= 0.0)) bad_value("time.T", entries["time.T"], "must be nonnegative");
  if (std::abs(cfg.T / cfg.dt - std::round(cfg.T / cfg.dt)) > 1e-9 * (1.0 + cfg.T / cfg.dt))
    bad_value("time.T", entries["time.T"], "must be a multiple of dt");
  try {
    cfg.eps_schedule = parse_number_list(str("time.eps_schedule"));
  } catch (const Error&) {
    bad_value("time.eps_schedule", entries["time.eps_schedule"], "expected a comma separated list");
  }
  if (cfg.eps_schedule.empty()) bad_value("time.eps_schedule", entries["time.eps_schedule"], "empty schedule");
  for (std::size_t k = 0; k < cfg.eps_schedule.size(); ++k) {
    if (!(cfg.eps_schedule[k] > 0.0)) bad_value("time.eps_schedule", entries["time.eps_schedule"], "entries must be positive");
    if (k > 0 && !(cfg.eps_schedule[k] < cfg.eps_schedule[k - 1]))
      bad_value("time.eps_schedule", entries["time.eps_schedule"], "must be strictly decreasing");
  }
  cfg.tau = num("time.tau");
  if (!(cfg.tau >= 0.0)) bad_value("time.tau", entries["time.tau"], "must be nonnegative");

  cfg.solver.newton_tol = num("solver.newton_tol");
  cfg.solver.newton_max_iter = static_cast<int>(to_int("solver.newton_max_iter", entries["solver.newton_max_iter"]));
  cfg.solver.tol_kkt = num("solver.tol_kkt");
  cfg.solver.tol_mean = num("solver.tol_mean");
  cfg.solver.max_halvings = static_cast<int>(to_int("solver.max_halvings", entries["solver.max_halvings"]));
  cfg.solver.locate_events = to_bool("solver.locate_events", entries["solver.locate_events"]);
  cfg.solver.seed = static_cast<std::uint64_t>(to_int("solver.seed", entries["solver.seed"]));
  cfg.output.checkpoint_every = static_cast<int>(to_int("output.checkpoint_every", entries["output.checkpoint_every"]));
  cfg.output.store_every = static_cast<int>(to_int("output.store_every", entries["output.store_every"]));
  if (cfg.output.store_every < 1) bad_value("output.store_every", entries["output.store_every"], "must be >= 1");

  try {
    out.study.tau_schedule = parse_number_list(str("study.tau_schedule"));
  } catch (const Error&) {
    bad_value("study.tau_schedule", entries["study.tau_schedule"], "expected a comma separated list");
  }
  out.study.delta = num("study.delta");

  // weight and bound ordering, then admissibility of the initial data
  (void)cfg.constraint();
  check_initial_data(cfg);
  return out;
}

LoadedConfig parse_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), overrides);
}

}  // namespace chdbc
