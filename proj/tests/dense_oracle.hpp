#pragma once

// Dense reference for one backward-Euler step, written from the equations
// rather than from the solver's data structures. The chemical potential is
// eliminated: with y = (-Delta_N)^+ (v - v_prev)/dt (zero mean), the step reads
//
//   W [y + tau r + beta_eps(u) + pi(u) - f] + W A v
//     + on boundary rows: dx [r + beta_G,eps(u) + eps v + pi(u) - f_G + lambda w] + dx B v  =  omega W
//   sum W v = 0,   (constrained) dx sum w v_G = bound
//
// with r = (v - v_prev)/dt, u = v + m0, A the mirrored-ghost five-point
// -Laplacian and B the periodic -d^2/dx^2 on each boundary row. Solved by
// Newton with a central-difference Jacobian and an LU solve.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "chdbc/geometry.hpp"

namespace oracle {

struct Problem {
  chdbc::StripGrid grid;
  // scalar nonlinearities, already shifted by m0 by the caller if needed
  std::function<double(double)> beta_bulk;
  std::function<double(double)> beta_boundary;
  std::function<double(double)> pi_bulk;
  std::function<double(double)> pi_boundary;
  double m0 = 0.0;
  double eps = 0.0;
  double tau = 0.0;
  double dt = 0.0;
  std::vector<double> v_prev;  // bulk nodes
  std::vector<double> f;       // bulk nodes
  std::vector<double> f_gamma; // boundary nodes
  std::vector<double> w;       // boundary nodes
  bool constrained = false;
  double bound = 0.0;
};

struct Solution {
  std::vector<double> v;
  double omega = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Yosida approximation of r -> r^p by bisection on x + e x^p = r.
inline double yosida_power(int p, double e, double r) {
  double lo = std::min(0.0, r), hi = std::max(0.0, r);
  for (int k = 0; k < 200 && hi - lo > 0.0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (mid + e * std::pow(mid, p) > r) hi = mid;
    else lo = mid;
  }
  const double x = 0.5 * (lo + hi);
  return (r - x) / e;
}

inline Eigen::MatrixXd neg_laplacian(const chdbc::StripGrid& g) {
  const int n = static_cast<int>(g.bulk_size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double ix = 1.0 / (g.dx() * g.dx()), iy = 1.0 / (g.dy() * g.dy());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int k = static_cast<int>(g.node(i, j));
      A(k, k) += 2 * ix + 2 * iy;
      A(k, static_cast<int>(g.node(i + 1, j))) -= ix;
      A(k, static_cast<int>(g.node(i - 1, j))) -= ix;
      const int up = j + 1 < g.ny ? j + 1 : j - 1;
      const int down = j > 0 ? j - 1 : j + 1;
      A(k, static_cast<int>(g.node(i, up))) -= iy;
      A(k, static_cast<int>(g.node(i, down))) -= iy;
    }
  return A;
}

class Dense {
 public:
  explicit Dense(Problem p) : p_(std::move(p)), n_(static_cast<int>(p_.grid.bulk_size())) {
    const chdbc::StripGrid& g = p_.grid;
    A_ = neg_laplacian(g);
    W_.resize(n_);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) W_(static_cast<int>(g.node(i, j))) = g.bulk_weight(j);
    // bordered Neumann operator for the zero-mean pseudo-inverse
    Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(n_ + 1, n_ + 1);
    Bd.topLeftCorner(n_, n_) = A_;
    Bd.block(n_, 0, 1, n_) = W_.transpose();
    Bd.block(0, n_, n_, 1) = Eigen::VectorXd::Ones(n_);
    bordered_ = Bd.fullPivLu();
  }

  int unknowns() const { return n_ + 1 + (p_.constrained ? 1 : 0); }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
    const chdbc::StripGrid& g = p_.grid;
    const double dx = g.dx();
    Eigen::VectorXd v = x.head(n_);
    const double omega = x(n_);
    const double lambda = p_.constrained ? x(n_ + 1) : 0.0;
    Eigen::VectorXd r(n_);
    for (int k = 0; k < n_; ++k) r(k) = (v(k) - p_.v_prev[k]) / p_.dt;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ + 1);
    rhs.head(n_) = r;
    const Eigen::VectorXd y = bordered_.solve(rhs).head(n_);

    Eigen::VectorXd R = A_ * v;
    R = W_.cwiseProduct(R);
    for (int k = 0; k < n_; ++k) {
      const double u = v(k) + p_.m0;
      R(k) += W_(k) * (y(k) + p_.tau * r(k) + p_.beta_bulk(u) + p_.pi_bulk(u) - p_.f[k] - omega);
    }
    double mass = 0.0;
    for (int side = 0; side < 2; ++side) {
      const int j = side == 0 ? 0 : g.ny - 1;
      for (int i = 0; i < g.nx; ++i) {
        const int k = static_cast<int>(g.node(i, j));
        const int b = side * g.nx + i;
        const double u = v(k) + p_.m0;
        const double lb = (2 * v(k) - v(static_cast<int>(g.node(i + 1, j))) - v(static_cast<int>(g.node(i - 1, j)))) / (dx * dx);
        R(k) += dx * (r(k) + p_.beta_boundary(u) + p_.eps * v(k) + p_.pi_boundary(u) - p_.f_gamma[b] + lambda * p_.w[b]) +
                dx * lb;
        mass += dx * p_.w[b] * v(k);
      }
    }
    Eigen::VectorXd out(unknowns());
    out.head(n_) = R;
    out(n_) = W_.dot(v);
    if (p_.constrained) out(n_ + 1) = mass - p_.bound;
    return out;
  }

  Solution solve(const std::vector<double>& guess, int max_iter = 60, double tol = 1e-13) const {
    const int m = unknowns();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < n_; ++k) x(k) = guess[k];
    Solution s;
    Eigen::VectorXd F = residual(x);
    for (int it = 0; it < max_iter && F.lpNorm<Eigen::Infinity>() > tol; ++it) {
      Eigen::MatrixXd J(m, m);
      for (int c = 0; c < m; ++c) {
        const double h = 1e-7 * (1.0 + std::abs(x(c)));
        Eigen::VectorXd xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        J.col(c) = (residual(xp) - residual(xm)) / (2 * h);
      }
      const Eigen::VectorXd dxv = J.fullPivLu().solve(-F);
      double step = 1.0;
      for (int ls = 0; ls < 30; ++ls) {
        const Eigen::VectorXd trial = x + step * dxv;
        const Eigen::VectorXd Ft = residual(trial);
        if (Ft.norm() < F.norm() || ls == 29) {
          x = trial;
          F = Ft;
          break;
        }
        step *= 0.5;
      }
      s.iterations = it + 1;
    }
    s.v.assign(x.data(), x.data() + n_);
    s.omega = x(n_);
    s.lambda = p_.constrained ? x(n_ + 1) : 0.0;
    s.residual = F.lpNorm<Eigen::Infinity>();
    return s;
  }

 private:
  Problem p_;
  int n_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd W_;
  Eigen::FullPivLU<Eigen::MatrixXd> bordered_;
};

}  // namespace oracle
