#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version (namespace
// kernels) and a plain serial reference (namespace kernels::serial) that the
// tests and the benchmark compare against. Kernels only write disjoint output
// entries; there are no parallel reductions, so results are bit-identical to
// the serial reference regardless of the thread count.

#include <cstddef>
#include <span>

#include "chdbc/geometry.hpp"

namespace chdbc::kernels {

/// out = five-point Laplacian of f; `dn` (size 2*nx, may be empty for zero)
/// is the outward normal derivative used for the ghost rows.
void laplace_bulk(const StripGrid& g, std::span<const double> f, std::span<const double> dn,
                  std::span<double> out);
void laplace_beltrami(const StripGrid& g, std::span<const double> f, std::span<double> out);

template <class Fn>
void map(std::span<const double> in, std::span<double> out, Fn&& fn) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = fn(in[k]);
}

namespace serial {

void laplace_bulk(const StripGrid& g, std::span<const double> f, std::span<const double> dn,
                  std::span<double> out);
void laplace_beltrami(const StripGrid& g, std::span<const double> f, std::span<double> out);

template <class Fn>
void map(std::span<const double> in, std::span<double> out, Fn&& fn) {
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = fn(in[k]);
}

}  // namespace serial
}  // namespace chdbc::kernels
