#include <cmath>
#include <functional>
#include <random>

#include "chdbc/error.hpp"
#include "chdbc/monotone.hpp"
#include "doctest.h"

using namespace chdbc;

namespace {

// Root of x + eps*x^p = r by plain bisection.
double power_resolvent_oracle(int p, double eps, double r) {
  double lo = std::min(0.0, r), hi = std::max(0.0, r);
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid + eps * std::pow(mid, p) > r) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb, double whole,
               double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), 1e-13, 50);
}

}  // namespace

TEST_CASE("minimal section") {
  CHECK(MonotoneGraph::power_odd(3).minimal_section(2.0) == 8.0);
  const MonotoneGraph box = MonotoneGraph::interval_indicator(-1.0, 1.0);
  CHECK(box.minimal_section(0.5) == 0.0);
  CHECK(box.minimal_section(1.0) == 0.0);
  CHECK(box.section(1.0).first == 0.0);
  CHECK(std::isinf(box.section(1.0).second));
  CHECK_THROWS_AS(box.minimal_section(1.5), Error);
  // vertical piece at r = 0 spanning [-1, 2]
  const MonotoneGraph sgn = MonotoneGraph::piecewise_linear({{-1, -2}, {0, -1}, {0, 2}, {1, 3}});
  CHECK(sgn.minimal_section(0.0) == 0.0);
  CHECK(sgn.minimal_section(0.5) == doctest::Approx(2.5));
}

TEST_CASE("resolvent") {
  const MonotoneGraph cubic = MonotoneGraph::power_odd(3);
  CHECK(cubic.resolvent(1.0, 1.0) == doctest::Approx(power_resolvent_oracle(3, 1.0, 1.0)).epsilon(1e-14));
  CHECK(cubic.resolvent(1.0, 1.0) == doctest::Approx(0.6823278038280193));
  const MonotoneGraph box = MonotoneGraph::interval_indicator(-1.0, 1.0);
  for (double eps : {0.1, 1.0, 7.0}) CHECK(box.resolvent(eps, 2.0) == 1.0);
  for (const char* p : {"quartic", "deep_quench", "linear", "power:5", "pwl:-1:-2,0:0,0:1,2:4"})
    CHECK(graph_from_preset(p).resolvent(0.3, 0.0) == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-20.0, 20.0);
  for (int k = 0; k < 200; ++k) {
    const double r = U(rng);
    for (int p : {3, 5, 7}) {
      const double eps = std::pow(10.0, -3 + 3 * std::abs(U(rng)) / 20);
      const double x = MonotoneGraph::power_odd(p).resolvent(eps, r);
      CHECK(std::abs(x + eps * std::pow(x, p) - r) <= 1e-14 * (1 + std::abs(r)) * 4);
    }
  }
}

TEST_CASE("Yosida approximation and envelope values") {
  const MonotoneGraph cubic = MonotoneGraph::power_odd(3);
  const double J = power_resolvent_oracle(3, 1.0, 1.0);
  CHECK(cubic.yosida(1.0, 1.0) == doctest::Approx(1.0 - J).epsilon(1e-13));
  CHECK(cubic.yosida(1.0, 1.0) == doctest::Approx(J * J * J).epsilon(1e-13));
  CHECK(cubic.moreau_envelope(1.0, 1.0) == doctest::Approx((1 - J) * (1 - J) / 2 + std::pow(J, 4) / 4).epsilon(1e-13));
  CHECK(cubic.moreau_envelope(1.0, 1.0) == doctest::Approx(0.1046).epsilon(1e-3));

  const MonotoneGraph box = MonotoneGraph::interval_indicator(-1.0, 1.0);
  CHECK(box.yosida(0.5, 2.0) == doctest::Approx(2.0));
  CHECK(box.moreau_envelope(0.5, 2.0) == doctest::Approx(1.0));
  for (const char* p : {"quartic", "deep_quench", "pwl:-1:-2,0:0,0:1,2:4"}) {
    CHECK(graph_from_preset(p).yosida(0.1, 0.0) == 0.0);
    CHECK(graph_from_preset(p).moreau_envelope(0.1, 0.0) == 0.0);
  }
}

TEST_CASE("boundary Yosida uses eps*rho") {
  const GraphPair p1{MonotoneGraph::power_odd(3), MonotoneGraph::power_odd(3), 1.0, 2.0};
  for (double r : {-2.0, 0.3, 5.0}) CHECK(p1.yosida_boundary(0.1, r) == p1.boundary.yosida(0.1, r));
  const GraphPair p2{MonotoneGraph::power_odd(3), MonotoneGraph::power_odd(3), 2.0, 2.0};
  CHECK(yosida_boundary(p2, 0.5, 1.0) == doctest::Approx(1.0 - power_resolvent_oracle(3, 1.0, 1.0)).epsilon(1e-13));
  CHECK(yosida_boundary(p2, 0.5, 0.0) == 0.0);
  // Lipschitz constant 1/(eps*rho)
  const double a = yosida_boundary(p2, 0.01, 3.0), b = yosida_boundary(p2, 0.01, 3.001);
  CHECK(std::abs(a - b) <= 0.001 / 0.02 + 1e-12);
}

TEST_CASE("Yosida properties on random samples") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  std::uniform_real_distribution<double> E(-3.0, 0.0);
  const std::vector<MonotoneGraph> graphs = {graph_from_preset("quartic"), graph_from_preset("power:5"),
                                             graph_from_preset("linear"), graph_from_preset("deep_quench"),
                                             graph_from_preset("pwl:-1:-3,0:0,0:0.5,1:1,3:10")};
  for (int k = 0; k < 400; ++k) {
    const MonotoneGraph& G = graphs[k % graphs.size()];
    const double eps = std::pow(10.0, E(rng));
    const double r = U(rng), s = U(rng);
    const double yr = G.yosida(eps, r), ys = G.yosida(eps, s);
    CHECK(std::abs(yr - ys) <= std::abs(r - s) / eps + 1e-12 * (1 + std::abs(r) / eps));
    CHECK((yr - ys) * (r - s) >= 0.0);
    CHECK(std::abs(G.resolvent(eps, r) - G.resolvent(eps, s)) <= std::abs(r - s) * (1 + 1e-12));
    if (G.in_domain(r)) {
      CHECK(std::abs(yr) <= std::abs(G.minimal_section(r)) * (1 + 1e-12) + 1e-12);
      CHECK(G.moreau_envelope(eps, r) <= G.potential(r) * (1 + 1e-12) + 1e-14);
    }
    CHECK(G.moreau_envelope(eps, r) >= 0.0);
  }
}

TEST_CASE("envelope equals the integral of the Yosida approximation") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (const char* p : {"quartic", "deep_quench", "pwl:-1:-3,0:0,0:0.5,1:1,3:10", "power:5"}) {
    const MonotoneGraph G = graph_from_preset(p);
    for (double eps : {1.0, 0.1, 0.01}) {
      const double r = U(rng);
      const double quad = integrate([&](double s) { return G.yosida(eps, s); }, 0.0, r);
      CHECK(std::abs(G.moreau_envelope(eps, r) - quad) <= 1e-10);
    }
  }
}

TEST_CASE("monotone convergence as eps decreases") {
  const MonotoneGraph cubic = MonotoneGraph::power_odd(3);
  double prev = 0.0, prev_gap = 1.0;
  for (double eps : {1.0, 0.1, 0.01, 0.001}) {
    const double y = cubic.yosida(eps, 1.0);
    CHECK(y > prev);
    CHECK(std::abs(y - 1.0) < prev_gap);
    prev = y;
    prev_gap = std::abs(y - 1.0);
  }
  for (double r : {-2.0, -0.5, 0.7, 3.0}) {
    double e = 0.0;
    for (double eps : {1.0, 0.1, 0.01}) {
      const double v = cubic.moreau_envelope(eps, r);
      CHECK(v >= e);
      CHECK(v <= cubic.potential(r));
      e = v;
    }
  }
}

TEST_CASE("validate_A1") {
  for (const char* p : {"quartic", "linear", "power:5", "pwl:-1:-3,0:0,0:0.5,1:1"})
    CHECK(validate_A1(graph_from_preset(p)).pass);
  CHECK_FALSE(validate_A1(graph_from_preset("deep_quench")).pass);
  // regularized graphs are admissible, including the obstacle
  for (double eps : {1.0, 0.01}) {
    CHECK(validate_A1(regularized_graph(graph_from_preset("deep_quench"), eps)).pass);
    CHECK(validate_A1(regularized_graph(graph_from_preset("quartic"), eps)).pass);
  }
  // a nonconvex potential is caught
  const MonotoneGraph bad = MonotoneGraph::custom("bad", [](double r) { return std::sin(r); },
                                                  [](double r) { return 1 - std::cos(r); });
  CHECK_FALSE(validate_A1(bad).pass);
}

TEST_CASE("validate_A5 reports tight constants") {
  const MonotoneGraph r3 = MonotoneGraph::power_odd(3), r5 = MonotoneGraph::power_odd(5);
  // sup |r^3| / (1 + r^4/4) is attained at r^4 = 12
  const double tight = std::pow(12.0, 0.75) / 4.0;

  const GraphPair same2{r3, r3, 1.0, 2.0};
  const A5Report ok = validate_A5(same2, default_lattice(same2));
  CHECK(ok.pass);
  CHECK(ok.eps_level_ok);
  CHECK(ok.tight_c0_growth == doctest::Approx(tight).epsilon(1e-3));
  CHECK(ok.tight_c0_growth <= tight);

  const GraphPair same1{r3, r3, 1.0, 1.0};
  const A5Report g1 = validate_A5(same1, default_lattice(same1));
  CHECK_FALSE(g1.growth_bulk_ok);
  CHECK(g1.compat_ok);

  const GraphPair up{r3, r5, 1.0, 3.0};
  const A5Report u = validate_A5(up, default_lattice(up));
  CHECK(u.compat_ok);
  CHECK(u.growth_boundary_ok);
  CHECK(u.pass);

  const GraphPair down{r5, r3, 1.0, 1.0};
  const A5Report d = validate_A5(down, default_lattice(down));
  CHECK_FALSE(d.compat_ok);
  bool at_ten = false;
  for (const auto& v : d.violations)
    if (std::abs(std::abs(v.r) - 10.0) < 1e-12 && v.check.find("compat") != std::string::npos) at_ten = true;
  CHECK(at_ten);
  // 10^5 <= rho 10^3 + 1 needs rho >= (10^5 - 1) / 10^3 at the far end of the lattice
  CHECK(d.tight_rho == doctest::Approx((1e5 - 1.0) / 1e3).epsilon(1e-9));
}

TEST_CASE("preset parsing") {
  CHECK(graph_from_preset("quartic").kind() == MonotoneGraph::Kind::PowerOdd);
  CHECK(graph_from_preset("deep_quench").kind() == MonotoneGraph::Kind::IntervalIndicator);
  CHECK(graph_from_preset("pwl:-1:-1,1:1").kind() == MonotoneGraph::Kind::PiecewiseLinear);
  CHECK_THROWS_AS(graph_from_preset("power:4"), Error);
  CHECK_THROWS_AS(graph_from_preset("pwl:1:1,-1:-1"), Error);
  CHECK_THROWS_AS(graph_from_preset("nope"), Error);
}

TEST_CASE("parallel Yosida map matches the pointwise values") {
  const MonotoneGraph G = graph_from_preset("quartic");
  std::vector<double> in(1000), out(1000);
  for (std::size_t k = 0; k < in.size(); ++k) in[k] = -5.0 + 0.01 * static_cast<double>(k);
  kernels::yosida_map(G, 0.01, 0.25, in, out);
  for (std::size_t k = 0; k < in.size(); ++k) CHECK(out[k] == G.yosida(0.01, in[k] + 0.25));
}
