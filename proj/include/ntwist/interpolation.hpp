#pragma once

// Grid functions with local Lagrange interpolation of even order p (degree
// p-1 on the p nearest nodes, periodic wrap), and circle maps stored as lift
// displacements on such grids.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"

namespace ntwist {

inline constexpr int kMaxInterpolationOrder = 8;

inline void check_interpolation_order(int order, std::size_t n) {
  if (order < 2 || order > kMaxInterpolationOrder || order % 2 != 0) {
    throw DomainError("interpolation order must be even in [2, 8], got " + std::to_string(order));
  }
  if (n < static_cast<std::size_t>(4 * order)) {
    throw DomainError("grid too coarse for interpolation order " + std::to_string(order));
  }
}

// Node indices base, base+1, ..., base+order-1 (unwrapped) and their weights.
struct Stencil {
  long base = 0;
  int order = 0;
  std::array<double, kMaxInterpolationOrder> w{};
  std::array<double, kMaxInterpolationOrder> dw{};  // d/dtheta of the weights
};

inline Stencil make_stencil(double theta, std::size_t n, int order) {
  const double t = theta * static_cast<double>(n);
  const double j0 = std::floor(t);
  const double s = t - j0;
  Stencil st;
  st.order = order;
  st.base = static_cast<long>(j0) - order / 2 + 1;
  std::array<double, kMaxInterpolationOrder> off{};
  for (int m = 0; m < order; ++m) off[m] = static_cast<double>(m - order / 2 + 1);
  for (int m = 0; m < order; ++m) {
    double num = 1.0, den = 1.0, dnum = 0.0;
    for (int l = 0; l < order; ++l) {
      if (l == m) continue;
      den *= off[m] - off[l];
      // product rule, accumulated alongside the product itself
      dnum = dnum * (s - off[l]) + num;
      num *= s - off[l];
    }
    st.w[m] = num / den;
    st.dw[m] = dnum / den * static_cast<double>(n);
  }
  return st;
}

inline double apply_stencil(const Stencil& st, std::span<const double> u) noexcept {
  const long n = static_cast<long>(u.size());
  double acc = 0.0;
  for (int m = 0; m < st.order; ++m) {
    long j = (st.base + m) % n;
    if (j < 0) j += n;
    acc += st.w[m] * u[static_cast<std::size_t>(j)];
  }
  return acc;
}

inline double apply_stencil_derivative(const Stencil& st, std::span<const double> u) noexcept {
  const long n = static_cast<long>(u.size());
  double acc = 0.0;
  for (int m = 0; m < st.order; ++m) {
    long j = (st.base + m) % n;
    if (j < 0) j += n;
    acc += st.dw[m] * u[static_cast<std::size_t>(j)];
  }
  return acc;
}

inline double interp(const PeriodicScalar& u, double theta, int order = 4) {
  return apply_stencil(make_stencil(theta, u.size(), order), u.values());
}

inline double interp_derivative(const PeriodicScalar& u, double theta, int order = 4) {
  return apply_stencil_derivative(make_stencil(theta, u.size(), order), u.values());
}

// Centered finite-difference derivative of order `order` (stencil of order+1 nodes).
inline PeriodicScalar grid_derivative(const PeriodicScalar& u, int order = 4) {
  const long n = static_cast<long>(u.size());
  const int half = order / 2;
  std::array<double, kMaxInterpolationOrder + 1> c{};
  // Derivative at 0 of the Lagrange basis on offsets -half..half.
  for (int m = -half; m <= half; ++m) {
    if (m == 0) continue;
    double den = 1.0, num = 1.0;
    for (int l = -half; l <= half; ++l) {
      if (l == m) continue;
      den *= static_cast<double>(m - l);
      if (l != 0) num *= static_cast<double>(-l);
    }
    c[static_cast<std::size_t>(m + half)] = num / den;
  }
  const double scale = static_cast<double>(n);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (long j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int m = -half; m <= half; ++m) {
      if (m == 0) continue;
      long k = (j + m) % n;
      if (k < 0) k += n;
      acc += c[static_cast<std::size_t>(m + half)] * u[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(j)] = acc * scale;
  }
  return PeriodicScalar(std::move(out));
}

// Circle map f(theta) = theta + g(theta) with g 1-periodic, known on the grid.
class InternalMap {
 public:
  InternalMap(PeriodicScalar displacement, int order = 4)
      : g_(std::move(displacement)), order_(order) {
    check_interpolation_order(order_, g_.size());
  }

  static InternalMap rotation(std::size_t n, double omega, int order = 4) {
    return InternalMap(PeriodicScalar::constant(n, omega), order);
  }

  std::size_t size() const noexcept { return g_.size(); }
  int order() const noexcept { return order_; }
  const PeriodicScalar& displacement() const noexcept { return g_; }
  PeriodicScalar& displacement() noexcept { return g_; }

  double operator()(double theta) const { return theta + interp(g_, theta, order_); }
  double slope(double theta) const { return 1.0 + interp_derivative(g_, theta, order_); }

  // f(theta_j) on the lift.
  std::vector<double> image_lift() const {
    std::vector<double> out(size());
    for (std::size_t j = 0; j < size(); ++j) out[j] = g_.node(j) + g_[j];
    return out;
  }

  // f' at the nodes, from the centered difference of the displacement.
  PeriodicScalar slope_on_grid() const { return grid_derivative(g_, order_) + 1.0; }

 private:
  PeriodicScalar g_;
  int order_;
};

// f^{-1} on the same grid, by per-node Newton on the lift.
inline InternalMap invert_map(const InternalMap& f) {
  const PeriodicScalar slope = f.slope_on_grid();
  for (std::size_t j = 0; j < slope.size(); ++j) {
    if (!(slope[j] > 0.0)) {
      throw InversionError("invert_map: circle map is not orientation preserving at node " +
                           std::to_string(j));
    }
  }
  const std::size_t n = f.size();
  std::vector<double> ginv(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double target = f.displacement().node(j);
    double s = target - f.displacement()[j];
    bool done = false;
    for (int it = 0; it < 50; ++it) {
      const Stencil st = make_stencil(s, n, f.order());
      const double r = s + apply_stencil(st, f.displacement().values()) - target;
      const double d = 1.0 + apply_stencil_derivative(st, f.displacement().values());
      if (!(d > 0.0)) throw InversionError("invert_map: non-monotone interpolant");
      s -= r / d;
      if (std::abs(r) < 1e-15) {
        done = true;
        break;
      }
    }
    if (!done) throw InversionError("invert_map: Newton failed at node " + std::to_string(j));
    ginv[j] = s - target;
  }
  return InternalMap(PeriodicScalar(std::move(ginv)), f.order());
}

}  // namespace ntwist
