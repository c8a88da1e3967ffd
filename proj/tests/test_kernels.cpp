#include <cmath>
#include <random>

#include "chdbc/geometry.hpp"
#include "chdbc/kernels.hpp"
#include "chdbc/monotone.hpp"
#include "chdbc/operators.hpp"
#include "chdbc/stepper.hpp"
#include "doctest.h"

using namespace chdbc;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = N(rng);
  return v;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  std::mt19937_64 rng(21);
  const StripGrid g(2.0, 1.0, 24, 17);
  const auto f = random_vec(g.bulk_size(), rng);
  const auto dn = random_vec(g.boundary_size(), rng);
  const auto fb = random_vec(g.boundary_size(), rng);

  std::vector<double> a(g.bulk_size()), b(g.bulk_size());
  kernels::laplace_bulk(g, f, dn, a);
  kernels::serial::laplace_bulk(g, f, dn, b);
  CHECK(a == b);
  kernels::laplace_bulk(g, f, {}, a);
  kernels::serial::laplace_bulk(g, f, {}, b);
  CHECK(a == b);

  std::vector<double> c(g.boundary_size()), d(g.boundary_size());
  kernels::laplace_beltrami(g, fb, c);
  kernels::serial::laplace_beltrami(g, fb, d);
  CHECK(c == d);

  for (const char* preset : {"quartic", "deep_quench", "pwl:-1:-2,0:0,1:3"}) {
    const MonotoneGraph G = graph_from_preset(preset);
    kernels::yosida_map(G, 0.05, 0.2, f, a);
    kernels::serial::yosida_map(G, 0.05, 0.2, f, b);
    CHECK(a == b);
  }
}

TEST_CASE("kernels agree with the field-level operators") {
  std::mt19937_64 rng(22);
  const StripGrid g(1.5, 0.8, 8, 9);
  const BulkField f(g, random_vec(g.bulk_size(), rng));
  std::vector<double> out(g.bulk_size());
  kernels::serial::laplace_bulk(g, f.values, {}, out);
  const BulkField ref = laplace_bulk(f);
  for (std::size_t k = 0; k < out.size(); ++k) CHECK(out[k] == doctest::Approx(ref.values[k]).epsilon(1e-13));

  // independent oracle: plain five-point stencil with mirrored ghost rows
  const double dx = g.dx(), dy = g.dy();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double c = f(i, j);
      const double up = j + 1 < g.ny ? f(i, j + 1) : f(i, j - 1);
      const double down = j > 0 ? f(i, j - 1) : f(i, j + 1);
      const double expect = (f(i + 1, j) - 2 * c + f(i - 1, j)) / (dx * dx) + (up - 2 * c + down) / (dy * dy);
      CHECK(out[g.node(i, j)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("residual kernel: parallel and serial versions agree") {
  std::mt19937_64 rng(23);
  const StripGrid g(2.0, 1.0, 16, 9);
  const GraphPair pair{graph_from_preset("quartic"), graph_from_preset("quartic"), 1.5, 2.0};
  const PerturbationSpec P = perturbation_from_preset("linear:-1", 0.1);
  const auto v = random_vec(g.bulk_size(), rng, 0.3);
  const auto vp = random_vec(g.bulk_size(), rng, 0.3);
  const auto mu = random_vec(g.bulk_size(), rng);
  const auto f = random_vec(g.bulk_size(), rng);
  const auto fg = random_vec(g.boundary_size(), rng);
  const std::vector<double> w(g.boundary_size(), 1.0);
  kernels::ResidualInputs in;
  in.grid = &g;
  in.pair = &pair;
  in.pert = &P;
  in.eps = 0.01;
  in.tau = 0.5;
  in.dt = 1e-3;
  in.lambda = 0.7;
  in.v = v;
  in.v_prev = vp;
  in.mu = mu;
  in.f = f;
  in.f_gamma = fg;
  in.w = w;
  std::vector<double> e1(g.bulk_size()), e2(g.bulk_size()), s1(g.bulk_size()), s2(g.bulk_size());
  kernels::residual(in, e1, e2);
  kernels::serial::residual(in, s1, s2);
  for (std::size_t k = 0; k < e1.size(); ++k) {
    CHECK(e1[k] == doctest::Approx(s1[k]).epsilon(1e-12).scale(1.0));
    CHECK(e2[k] == doctest::Approx(s2[k]).epsilon(1e-12).scale(1.0));
  }
}
