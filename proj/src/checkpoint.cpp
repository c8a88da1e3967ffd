#include "chdbc/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "chdbc/error.hpp"

namespace chdbc {

namespace {

constexpr const char* kMagic = "chdbc-checkpoint-1";

void put_array(std::ostream& os, const char* name, const std::vector<double>& v) {
  os << name << ' ' << v.size() << '\n';
  char buf[40];
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", v[k]);
    os << buf << ((k + 1) % 8 == 0 || k + 1 == v.size() ? '\n' : ' ');
  }
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

[[noreturn]] void corrupt(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::Parse, "checkpoint '" + path + "': " + what);
}

std::vector<double> get_array(std::istream& is, const std::string& path, const char* name, std::size_t expect) {
  std::string tag;
  std::size_t n = 0;
  if (!(is >> tag >> n) || tag != name) corrupt(path, std::string("expected array ") + name);
  if (n != expect) corrupt(path, std::string("array ") + name + " has the wrong length");
  std::vector<double> v(n);
  for (auto& x : v) {
    std::string tok;
    if (!(is >> tok)) corrupt(path, std::string("truncated array ") + name);
    x = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const SolverState& s, double m0) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write checkpoint '" + path + "'");
  const StripGrid& g = s.v.grid();
  os << kMagic << '\n';
  os << "nx " << g.nx << "\nny " << g.ny << "\nLx " << num(g.Lx) << "\nLy " << num(g.Ly) << '\n';
  os << "t " << num(s.t) << "\neps " << num(s.eps) << "\ntau " << num(s.tau) << "\nm0 " << num(m0) << '\n';
  os << "step " << s.step_index << "\nlambda " << num(s.mult.lambda) << "\nomega " << num(s.mult.omega) << '\n';
  os << "active " << to_string(s.mult.active) << "\nh " << num(s.h) << '\n';
  put_array(os, "bulk", s.v.bulk.values);
  put_array(os, "boundary", s.v.boundary.values);
  put_array(os, "xi_bulk", s.xi.bulk.values);
  put_array(os, "xi_boundary", s.xi.boundary.values);
  put_array(os, "mu", s.mu.values);
  if (!os) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read checkpoint '" + path + "'");
  std::string magic;
  if (!(is >> magic) || magic != kMagic) corrupt(path, "bad header");

  auto scalar = [&](const char* key) {
    std::string k, tok;
    if (!(is >> k >> tok) || k != key) corrupt(path, std::string("expected ") + key);
    return tok;
  };
  const int nx = std::stoi(scalar("nx"));
  const int ny = std::stoi(scalar("ny"));
  const double Lx = std::strtod(scalar("Lx").c_str(), nullptr);
  const double Ly = std::strtod(scalar("Ly").c_str(), nullptr);
  const StripGrid g(Lx, Ly, nx, ny);

  Checkpoint c;
  SolverState& s = c.state;
  s.t = std::strtod(scalar("t").c_str(), nullptr);
  s.eps = std::strtod(scalar("eps").c_str(), nullptr);
  s.tau = std::strtod(scalar("tau").c_str(), nullptr);
  c.m0 = std::strtod(scalar("m0").c_str(), nullptr);
  s.step_index = std::stol(scalar("step"));
  s.mult.lambda = std::strtod(scalar("lambda").c_str(), nullptr);
  s.mult.omega = std::strtod(scalar("omega").c_str(), nullptr);
  const std::string active = scalar("active");
  if (active == to_string(ActiveBound::Inactive)) s.mult.active = ActiveBound::Inactive;
  else if (active == to_string(ActiveBound::Lower)) s.mult.active = ActiveBound::Lower;
  else if (active == to_string(ActiveBound::Upper)) s.mult.active = ActiveBound::Upper;
  else corrupt(path, "unknown active bound '" + active + "'");
  s.h = std::strtod(scalar("h").c_str(), nullptr);

  auto bulk = get_array(is, path, "bulk", g.bulk_size());
  auto boundary = get_array(is, path, "boundary", g.boundary_size());
  auto xi_bulk = get_array(is, path, "xi_bulk", g.bulk_size());
  auto xi_boundary = get_array(is, path, "xi_boundary", g.boundary_size());
  auto mu = get_array(is, path, "mu", g.bulk_size());
  s.v = CoupledField(BulkField(g, std::move(bulk)), BoundaryField(g, std::move(boundary)));
  s.xi = CoupledField(BulkField(g, std::move(xi_bulk)), BoundaryField(g, std::move(xi_boundary)));
  s.mu = BulkField(g, std::move(mu));
  return c;
}

}  // namespace chdbc
