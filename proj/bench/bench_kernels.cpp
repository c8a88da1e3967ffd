// Serial reference against OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "chdbc/kernels.hpp"
#include "chdbc/monotone.hpp"
#include "chdbc/operators.hpp"
#include "chdbc/stepper.hpp"

using namespace chdbc;

namespace {

StripGrid grid_for(const benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  return StripGrid(6.283185307179586, 1.0, n, n + 1);
}

std::vector<double> field(const StripGrid& g) {
  std::vector<double> f(g.bulk_size());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f[g.node(i, j)] = 0.5 * std::cos(g.x(i)) + 0.2 * std::cos(3.14159 * g.y(j));
  return f;
}

template <bool Parallel>
void BM_laplace_bulk(benchmark::State& st) {
  const StripGrid g = grid_for(st);
  const std::vector<double> f = field(g);
  std::vector<double> out(f.size());
  for (auto _ : st) {
    if constexpr (Parallel) kernels::laplace_bulk(g, f, {}, out);
    else kernels::serial::laplace_bulk(g, f, {}, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.size()));
}

template <bool Parallel>
void BM_laplace_beltrami(benchmark::State& st) {
  const StripGrid g = grid_for(st);
  std::vector<double> f(g.boundary_size()), out(g.boundary_size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::sin(0.1 * static_cast<double>(k));
  for (auto _ : st) {
    if constexpr (Parallel) kernels::laplace_beltrami(g, f, out);
    else kernels::serial::laplace_beltrami(g, f, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.size()));
}

template <bool Parallel>
void BM_yosida_map(benchmark::State& st) {
  const StripGrid g = grid_for(st);
  const MonotoneGraph G = graph_from_preset("quartic");
  const std::vector<double> f = field(g);
  std::vector<double> out(f.size());
  for (auto _ : st) {
    if constexpr (Parallel) kernels::yosida_map(G, 1e-2, 0.1, f, out);
    else kernels::serial::yosida_map(G, 1e-2, 0.1, f, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(f.size()));
}

template <bool Parallel>
void BM_residual(benchmark::State& st) {
  const StripGrid g = grid_for(st);
  const GraphPair pair{graph_from_preset("quartic"), graph_from_preset("quartic"), 1.0, 2.0};
  const PerturbationSpec P = perturbation_from_preset("linear:-1", 0.1);
  const std::vector<double> v = field(g);
  std::vector<double> vp(v), mu(v.size(), 0.3), f(v.size(), 0.0), fg(g.boundary_size(), 0.0), w(g.boundary_size(), 1.0);
  for (double& x : vp) x *= 0.9;
  kernels::ResidualInputs in;
  in.grid = &g;
  in.pair = &pair;
  in.pert = &P;
  in.eps = 1e-2;
  in.tau = 1.0;
  in.dt = 1e-3;
  in.v = v;
  in.v_prev = vp;
  in.mu = mu;
  in.f = f;
  in.f_gamma = fg;
  in.w = w;
  std::vector<double> e1(v.size()), e2(v.size());
  for (auto _ : st) {
    if constexpr (Parallel) kernels::residual(in, e1, e2);
    else kernels::serial::residual(in, e1, e2);
    benchmark::DoNotOptimize(e1.data());
    benchmark::DoNotOptimize(e2.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(v.size()));
}

}  // namespace

#define SIZES ->Arg(32)->Arg(64)->Arg(256)->Arg(1024)

BENCHMARK_TEMPLATE(BM_laplace_bulk, false) SIZES;
BENCHMARK_TEMPLATE(BM_laplace_bulk, true) SIZES;
BENCHMARK_TEMPLATE(BM_laplace_beltrami, false) SIZES;
BENCHMARK_TEMPLATE(BM_laplace_beltrami, true) SIZES;
BENCHMARK_TEMPLATE(BM_yosida_map, false) SIZES;
BENCHMARK_TEMPLATE(BM_yosida_map, true) SIZES;
BENCHMARK_TEMPLATE(BM_residual, false) SIZES;
BENCHMARK_TEMPLATE(BM_residual, true) SIZES;

BENCHMARK_MAIN();
