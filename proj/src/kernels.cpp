#include "chdbc/kernels.hpp"

namespace chdbc::kernels {

namespace {

inline double dn_at(std::span<const double> dn, std::size_t k) { return dn.empty() ? 0.0 : dn[k]; }

}  // namespace

void laplace_bulk(const StripGrid& g, std::span<const double> f, std::span<const double> dn,
                  std::span<double> out) {
  const int nx = g.nx;
  const int ny = g.ny;
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dy() * g.dy());
  const double two_idy = 2.0 / g.dy();
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(nx) * ny;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    const int j = static_cast<int>(k / nx);
    const int i = static_cast<int>(k % nx);
    const std::size_t row = static_cast<std::size_t>(j) * nx;
    const int ip = (i + 1 == nx) ? 0 : i + 1;
    const int im = (i == 0) ? nx - 1 : i - 1;
    const double c = f[row + i];
    const double lxx = (f[row + ip] - 2.0 * c + f[row + im]) * idx2;
    double lyy;
    if (j == 0) {
      lyy = 2.0 * (f[row + nx + i] - c) * idy2 + two_idy * dn_at(dn, i);
    } else if (j == ny - 1) {
      lyy = 2.0 * (f[row - nx + i] - c) * idy2 + two_idy * dn_at(dn, nx + i);
    } else {
      lyy = (f[row + nx + i] - 2.0 * c + f[row - nx + i]) * idy2;
    }
    out[k] = lxx + lyy;
  }
}

void laplace_beltrami(const StripGrid& g, std::span<const double> f, std::span<double> out) {
  const int nx = g.nx;
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const std::ptrdiff_t total = 2 * static_cast<std::ptrdiff_t>(nx);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    const int side = static_cast<int>(k / nx);
    const int i = static_cast<int>(k % nx);
    const std::size_t base = static_cast<std::size_t>(side) * nx;
    const int ip = (i + 1 == nx) ? 0 : i + 1;
    const int im = (i == 0) ? nx - 1 : i - 1;
    out[k] = (f[base + ip] - 2.0 * f[base + i] + f[base + im]) * idx2;
  }
}

namespace serial {

void laplace_bulk(const StripGrid& g, std::span<const double> f, std::span<const double> dn,
                  std::span<double> out) {
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dy() * g.dy());
  const double two_idy = 2.0 / g.dy();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double c = f[g.node(i, j)];
      const double lxx = (f[g.node(i + 1, j)] - 2.0 * c + f[g.node(i - 1, j)]) * idx2;
      double lyy;
      if (j == 0) {
        lyy = 2.0 * (f[g.node(i, 1)] - c) * idy2 + two_idy * dn_at(dn, i);
      } else if (j == g.ny - 1) {
        lyy = 2.0 * (f[g.node(i, j - 1)] - c) * idy2 + two_idy * dn_at(dn, g.nx + i);
      } else {
        lyy = (f[g.node(i, j + 1)] - 2.0 * c + f[g.node(i, j - 1)]) * idy2;
      }
      out[g.node(i, j)] = lxx + lyy;
    }
  }
}

void laplace_beltrami(const StripGrid& g, std::span<const double> f, std::span<double> out) {
  const double idx2 = 1.0 / (g.dx() * g.dx());
  for (int side = 0; side < 2; ++side) {
    for (int i = 0; i < g.nx; ++i) {
      auto at = [&](int ii) { return f[static_cast<std::size_t>(side) * g.nx + g.wrap(ii)]; };
      out[static_cast<std::size_t>(side) * g.nx + i] = (at(i + 1) - 2.0 * at(i) + at(i - 1)) * idx2;
    }
  }
}

}  // namespace serial
}  // namespace chdbc::kernels
