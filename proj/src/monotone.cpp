#include "chdbc/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "chdbc/error.hpp"
#include "chdbc/kernels.hpp"

namespace chdbc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double ipow(double x, int p) {
  double out = 1.0;
  for (int k = 0; k < p; ++k) out *= x;
  return out;
}

/// Root of x + eps*beta(x) = r for a continuous nondecreasing beta through the
/// origin. The bracket [min(0,r), max(0,r)] always contains the root; Newton
/// steps are taken when they stay inside the bracket, bisection otherwise.
template <class Beta, class Deriv>
double monotone_root(double eps, double r, Beta&& beta, Deriv&& deriv, bool has_deriv) {
  if (r == 0.0) return 0.0;
  double lo = std::min(0.0, r);
  double hi = std::max(0.0, r);
  auto g = [&](double x) { return x + eps * beta(x) - r; };
  const double glo = g(lo);
  const double ghi = g(hi);
  if (!(glo <= 0.0 && ghi >= 0.0) || !std::isfinite(glo) || !std::isfinite(ghi)) {
    std::ostringstream msg;
    msg << "cannot bracket resolvent at r=" << r << " (g(lo)=" << glo << ", g(hi)=" << ghi << ")";
    throw Error(ErrorCode::NoConvergence, msg.str());
  }
  const double tol = 1e-14 * (1.0 + std::abs(r));
  double x = has_deriv ? r / (1.0 + eps * std::max(0.0, deriv(0.0))) : 0.5 * (lo + hi);
  double best = x;
  double best_res = kInf;
  for (int it = 0; it < 400; ++it) {
    const double gx = g(x);
    if (std::abs(gx) < best_res) {
      best_res = std::abs(gx);
      best = x;
    }
    if (std::abs(gx) <= tol) return x;
    if (gx < 0.0) lo = x; else hi = x;
    if (!(hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))))
      return best;  // bracket collapsed to adjacent doubles
    double next = 0.5 * (lo + hi);
    if (has_deriv) {
      const double d = 1.0 + eps * deriv(x);
      const double trial = x - gx / d;
      if (trial > lo && trial < hi && std::isfinite(trial)) next = trial;
    }
    x = next;
  }
  throw Error(ErrorCode::NoConvergence, "resolvent iteration limit reached");
}

struct PolylineView {
  const std::vector<Knot>& k;

  std::size_t n() const { return k.size(); }
  double slope_left() const { return (k[1].s - k[0].s) / (k[1].r - k[0].r); }
  double slope_right() const {
    const std::size_t m = n();
    return (k[m - 1].s - k[m - 2].s) / (k[m - 1].r - k[m - 2].r);
  }

  std::pair<double, double> section(double r) const {
    const std::size_t m = n();
    if (r < k[0].r) {
      const double s = k[0].s + slope_left() * (r - k[0].r);
      return {s, s};
    }
    if (r > k[m - 1].r) {
      const double s = k[m - 1].s + slope_right() * (r - k[m - 1].r);
      return {s, s};
    }
    double lo = kInf;
    double hi = -kInf;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const Knot& a = k[i];
      const Knot& b = k[i + 1];
      if (r < a.r || r > b.r) continue;
      if (a.r == b.r) {
        lo = std::min(lo, a.s);
        hi = std::max(hi, b.s);
      } else {
        const double s = a.s + (b.s - a.s) * (r - a.r) / (b.r - a.r);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
    return {lo, hi};
  }

  /// Integral of beta from k[0].r to x.
  double primitive(double x) const {
    const std::size_t m = n();
    if (x <= k[0].r) {
      const double d = x - k[0].r;
      return k[0].s * d + 0.5 * slope_left() * d * d;
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const Knot& a = k[i];
      const Knot& b = k[i + 1];
      if (a.r == b.r) continue;
      const double end = std::min(b.r, x);
      if (end <= a.r) break;
      const double d = end - a.r;
      const double slope = (b.s - a.s) / (b.r - a.r);
      total += a.s * d + 0.5 * slope * d * d;
    }
    if (x > k[m - 1].r) {
      const double d = x - k[m - 1].r;
      total += k[m - 1].s * d + 0.5 * slope_right() * d * d;
    }
    return total;
  }

  /// (J_eps(r), dJ/dr).
  std::pair<double, double> resolvent(double eps, double r) const {
    const std::size_t m = n();
    auto gk = [&](std::size_t i) { return k[i].r + eps * k[i].s; };
    if (r <= gk(0)) {
      const double sl = slope_left();
      return {(r - eps * k[0].s + eps * sl * k[0].r) / (1.0 + eps * sl), 1.0 / (1.0 + eps * sl)};
    }
    if (r >= gk(m - 1)) {
      const double sl = slope_right();
      return {(r - eps * k[m - 1].s + eps * sl * k[m - 1].r) / (1.0 + eps * sl), 1.0 / (1.0 + eps * sl)};
    }
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const double g0 = gk(i);
      const double g1 = gk(i + 1);
      if (r >= g0 && r <= g1) {
        const double t = (r - g0) / (g1 - g0);
        return {k[i].r + t * (k[i + 1].r - k[i].r), (k[i + 1].r - k[i].r) / (g1 - g0)};
      }
    }
    return {k[m - 1].r, 0.0};  // unreachable for a valid polyline
  }
};

}  // namespace

MonotoneGraph MonotoneGraph::power_odd(int p) {
  if (p < 1 || p % 2 == 0) throw Error(ErrorCode::InvalidArgument, "power_odd requires an odd exponent >= 1");
  return MonotoneGraph("power:" + std::to_string(p), Power{p});
}

MonotoneGraph MonotoneGraph::piecewise_linear(std::vector<Knot> knots) {
  if (knots.size() < 2) throw Error(ErrorCode::InvalidArgument, "piecewise_linear needs at least two knots");
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const Knot& a = knots[i];
    const Knot& b = knots[i + 1];
    if (b.r < a.r || b.s < a.s) throw Error(ErrorCode::InvalidArgument, "knots must be nondecreasing in r and s");
    if (a.r == b.r && a.s == b.s) throw Error(ErrorCode::InvalidArgument, "duplicate knot");
  }
  if (knots[0].r == knots[1].r || knots[knots.size() - 2].r == knots.back().r)
    throw Error(ErrorCode::InvalidArgument, "end segments must not be vertical (domain must be all of R)");
  MonotoneGraph g("pwl", Polyline{std::move(knots)});
  const auto [lo, hi] = g.section(0.0);
  if (lo > 0.0 || hi < 0.0) throw Error(ErrorCode::InvalidArgument, "piecewise_linear graph must contain (0,0)");
  return g;
}

MonotoneGraph MonotoneGraph::interval_indicator(double a, double b) {
  if (!(a <= 0.0 && 0.0 <= b)) throw Error(ErrorCode::InvalidArgument, "interval_indicator requires a <= 0 <= b");
  std::ostringstream name;
  name << "interval[" << a << "," << b << "]";
  return MonotoneGraph(name.str(), Interval{a, b});
}

MonotoneGraph MonotoneGraph::custom(std::string name, std::function<double(double)> beta,
                                    std::function<double(double)> potential, std::function<double(double)> derivative) {
  if (!beta || !potential) throw Error(ErrorCode::InvalidArgument, "custom graph needs beta and its potential");
  return MonotoneGraph(std::move(name), Custom{std::move(beta), std::move(potential), std::move(derivative)});
}

MonotoneGraph::Kind MonotoneGraph::kind() const {
  return std::visit(Overloaded{[](const Power&) { return Kind::PowerOdd; },
                               [](const Polyline&) { return Kind::PiecewiseLinear; },
                               [](const Interval&) { return Kind::IntervalIndicator; },
                               [](const Custom&) { return Kind::Custom; }},
                    impl_);
}

bool MonotoneGraph::in_domain(double r) const {
  if (const auto* iv = std::get_if<Interval>(&impl_)) return r >= iv->a && r <= iv->b;
  return std::isfinite(r);
}

std::pair<double, double> MonotoneGraph::section(double r) const {
  return std::visit(
      Overloaded{
          [&](const Power& p) -> std::pair<double, double> {
            const double s = ipow(r, p.p);
            return {s, s};
          },
          [&](const Polyline& pl) { return PolylineView{pl.knots}.section(r); },
          [&](const Interval& iv) -> std::pair<double, double> {
            if (r < iv.a || r > iv.b) {
              std::ostringstream msg;
              msg << r << " outside [" << iv.a << "," << iv.b << "]";
              throw Error(ErrorCode::OutOfDomain, msg.str());
            }
            const double lo = (r == iv.a) ? -kInf : 0.0;
            const double hi = (r == iv.b) ? kInf : 0.0;
            return {lo, hi};
          },
          [&](const Custom& c) -> std::pair<double, double> {
            const double s = c.beta(r);
            return {s, s};
          }},
      impl_);
}

double MonotoneGraph::minimal_section(double r) const {
  const auto [lo, hi] = section(r);
  if (lo <= 0.0 && hi >= 0.0) return 0.0;
  return lo > 0.0 ? lo : hi;
}

double MonotoneGraph::potential(double r) const {
  return std::visit(Overloaded{[&](const Power& p) { return ipow(r, p.p + 1) / (p.p + 1); },
                               [&](const Polyline& pl) {
                                 const PolylineView v{pl.knots};
                                 return v.primitive(r) - v.primitive(0.0);
                               },
                               [&](const Interval& iv) { return (r >= iv.a && r <= iv.b) ? 0.0 : kInf; },
                               [&](const Custom& c) { return c.potential(r); }},
                    impl_);
}

double MonotoneGraph::resolvent(double eps, double r) const {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolvent requires eps > 0");
  return std::visit(
      Overloaded{[&](const Power& p) {
                   if (p.p == 1) return r / (1.0 + eps);
                   return monotone_root(
                       eps, r, [&](double x) { return ipow(x, p.p); },
                       [&](double x) { return p.p * ipow(x, p.p - 1); }, true);
                 },
                 [&](const Polyline& pl) { return PolylineView{pl.knots}.resolvent(eps, r).first; },
                 [&](const Interval& iv) { return std::clamp(r, iv.a, iv.b); },
                 [&](const Custom& c) {
                   return monotone_root(eps, r, c.beta, [&](double x) { return c.derivative ? c.derivative(x) : 0.0; },
                                        static_cast<bool>(c.derivative));
                 }},
      impl_);
}

double MonotoneGraph::resolvent_derivative(double eps, double r) const {
  return std::visit(Overloaded{[&](const Power& p) {
                                 const double x = resolvent(eps, r);
                                 return 1.0 / (1.0 + eps * p.p * ipow(x, p.p - 1));
                               },
                               [&](const Polyline& pl) { return PolylineView{pl.knots}.resolvent(eps, r).second; },
                               [&](const Interval& iv) { return (r > iv.a && r < iv.b) ? 1.0 : 0.0; },
                               [&](const Custom& c) {
                                 if (c.derivative) return 1.0 / (1.0 + eps * c.derivative(resolvent(eps, r)));
                                 const double h = 1e-6 * (1.0 + std::abs(r));
                                 return (resolvent(eps, r + h) - resolvent(eps, r - h)) / (2.0 * h);
                               }},
                    impl_);
}

double MonotoneGraph::yosida(double eps, double r) const { return (r - resolvent(eps, r)) / eps; }

double MonotoneGraph::yosida_derivative(double eps, double r) const {
  return (1.0 - resolvent_derivative(eps, r)) / eps;
}

double MonotoneGraph::moreau_envelope(double eps, double r) const {
  const double j = resolvent(eps, r);
  const double d = r - j;
  return d * d / (2.0 * eps) + potential(j);
}

std::vector<double> MonotoneGraph::breakpoints() const {
  std::vector<double> out;
  if (const auto* pl = std::get_if<Polyline>(&impl_))
    for (const Knot& k : pl->knots) out.push_back(k.r);
  if (const auto* iv = std::get_if<Interval>(&impl_)) out = {iv->a, iv->b};
  return out;
}

MonotoneGraph graph_from_preset(const std::string& spec) {
  if (spec == "quartic") {
    MonotoneGraph g = MonotoneGraph::power_odd(3);
    return g;
  }
  if (spec == "deep_quench") return MonotoneGraph::interval_indicator(-1.0, 1.0);
  if (spec == "linear") return MonotoneGraph::power_odd(1);
  if (spec.rfind("power:", 0) == 0) {
    try {
      return MonotoneGraph::power_odd(std::stoi(spec.substr(6)));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse, "bad power preset '" + spec + "'");
    }
  }
  if (spec.rfind("pwl:", 0) == 0) {
    std::vector<Knot> knots;
    std::stringstream list(spec.substr(4));
    std::string item;
    while (std::getline(list, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw Error(ErrorCode::Parse, "pwl knot '" + item + "' is not r:s");
      try {
        knots.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::Parse, "pwl knot '" + item + "' is not numeric");
      }
    }
    return MonotoneGraph::piecewise_linear(std::move(knots));
  }
  throw Error(ErrorCode::Parse, "unknown graph preset '" + spec + "'");
}

double yosida_boundary(const GraphPair& pair, double eps, double r) { return pair.yosida_boundary(eps, r); }

std::vector<double> default_lattice(const MonotoneGraph& g) {
  std::vector<double> pts;
  for (int k = 0; k <= 400; ++k) pts.push_back(-10.0 + 0.05 * k);
  for (double b : g.breakpoints()) {
    pts.push_back(b);
    pts.push_back(-b);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

std::vector<double> default_lattice(const GraphPair& pair) {
  std::vector<double> pts = default_lattice(pair.bulk);
  for (double b : pair.boundary.breakpoints()) {
    pts.push_back(b);
    pts.push_back(-b);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

A1Report validate_A1(const MonotoneGraph& g, std::span<const double> lattice) {
  A1Report rep;
  auto fail = [&](double r, const char* what, double mag) {
    rep.pass = false;
    rep.violations.push_back({r, what, mag});
  };
  if (!g.full_domain()) {
    fail(0.0, "domain", kInf);
    return rep;
  }
  const double p0 = g.potential(0.0);
  if (std::abs(p0) > 1e-14) fail(0.0, "potential_at_origin", std::abs(p0));
  const auto [lo0, hi0] = g.section(0.0);
  if (lo0 > 0.0 || hi0 < 0.0) fail(0.0, "origin_in_graph", std::min(std::abs(lo0), std::abs(hi0)));
  std::vector<double> pot(lattice.size());
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    const double r = lattice[k];
    pot[k] = g.potential(r);
    if (!std::isfinite(pot[k])) fail(r, "finite", kInf);
    else if (pot[k] < -1e-12) fail(r, "nonnegative", -pot[k]);
  }
  for (std::size_t k = 0; k + 1 < lattice.size(); ++k) {
    const double mid = 0.5 * (lattice[k] + lattice[k + 1]);
    const double chord = 0.5 * (pot[k] + pot[k + 1]);
    const double pm = g.potential(mid);
    const double slack = 1e-12 * (1.0 + std::abs(chord));
    if (pm > chord + slack) fail(mid, "convexity", pm - chord);
  }
  return rep;
}

A1Report validate_A1(const MonotoneGraph& g) {
  const auto lat = default_lattice(g);
  return validate_A1(g, lat);
}

A5Report validate_A5(const GraphPair& pair, std::span<const double> lattice) {
  A5Report rep;
  const double c0 = pair.c0;
  const double rho = pair.rho;
  auto fail = [&](double r, const char* what, double mag) {
    rep.pass = false;
    rep.violations.push_back({r, what, mag});
  };
  if (!pair.bulk.full_domain() || !pair.boundary.full_domain()) {
    rep.growth_bulk_ok = rep.growth_boundary_ok = rep.compat_ok = rep.eps_level_ok = false;
    fail(0.0, "domain", kInf);
    return rep;
  }
  auto exceeds = [](double lhs, double rhs) { return lhs > rhs + 1e-12 * (1.0 + std::abs(rhs)); };

  for (double r : lattice) {
    // growth bounds, every element of the section
    for (int which = 0; which < 2; ++which) {
      const MonotoneGraph& g = which == 0 ? pair.bulk : pair.boundary;
      const auto [lo, hi] = g.section(r);
      const double bound = 1.0 + g.potential(r);
      for (double s : {lo, hi}) {
        rep.tight_c0_growth = std::max(rep.tight_c0_growth, std::abs(s) / bound);
        if (exceeds(std::abs(s), c0 * bound)) {
          (which == 0 ? rep.growth_bulk_ok : rep.growth_boundary_ok) = false;
          fail(r, which == 0 ? "growth_bulk" : "growth_boundary", std::abs(s) - c0 * bound);
        }
      }
    }
    const double b = std::abs(pair.bulk.minimal_section(r));
    const double gb = std::abs(pair.boundary.minimal_section(r));
    rep.tight_c0_compat = std::max(rep.tight_c0_compat, b - rho * gb);
    if (b > c0) rep.tight_rho = std::max(rep.tight_rho, gb > 0.0 ? (b - c0) / gb : kInf);
    if (exceeds(b, rho * gb + c0)) {
      rep.compat_ok = false;
      fail(r, "compat", b - rho * gb - c0);
    }
    for (double eps : {1.0, 0.1, 0.01}) {
      const double be = std::abs(pair.yosida_bulk(eps, r));
      const double ge = std::abs(pair.yosida_boundary(eps, r));
      const double bhe = pair.envelope_bulk(eps, r);
      const double ghe = pair.envelope_boundary(eps, r);
      if (exceeds(be, c0 * (1.0 + bhe))) {
        rep.eps_level_ok = false;
        fail(r, "growth_bulk_eps", be - c0 * (1.0 + bhe));
      }
      if (exceeds(ge, c0 * (1.0 + ghe))) {
        rep.eps_level_ok = false;
        fail(r, "growth_boundary_eps", ge - c0 * (1.0 + ghe));
      }
      if (exceeds(be, rho * ge + c0)) {
        rep.eps_level_ok = false;
        fail(r, "compat_eps", be - rho * ge - c0);
      }
    }
  }
  return rep;
}

MonotoneGraph regularized_graph(const MonotoneGraph& g, double eps) {
  return MonotoneGraph::custom(
      g.name() + "_yosida", [g, eps](double r) { return g.yosida(eps, r); },
      [g, eps](double r) { return g.moreau_envelope(eps, r); }, [g, eps](double r) { return g.yosida_derivative(eps, r); });
}

namespace kernels {

void yosida_map(const MonotoneGraph& g, double eps, double shift, std::span<const double> in, std::span<double> out) {
  map(in, out, [&](double x) { return g.yosida(eps, x + shift); });
}

namespace serial {
void yosida_map(const MonotoneGraph& g, double eps, double shift, std::span<const double> in, std::span<double> out) {
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = g.yosida(eps, in[k] + shift);
}
}  // namespace serial
}  // namespace kernels

}  // namespace chdbc
