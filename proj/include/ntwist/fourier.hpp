#pragma once

// Real 1-periodic scalar functions sampled on the uniform grid
// theta_j = j/N (N a power of two), with the dual truncated Fourier view
//
//   u(theta) = sum_{k=-N/2+1}^{N/2} c_k exp(2 pi i k theta),  c_{-k} = conj(c_k).
//
// The Nyquist mode k = N/2 is carried as the real term c_{N/2} cos(pi N theta).
// Shifts act on it through cos(pi N delta), which is exact on the grid; the
// derivative and the cohomological solvers drop it.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "ntwist/error.hpp"

namespace ntwist {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr bool is_power_of_two(std::size_t n) noexcept {
  return n != 0 && (n & (n - 1)) == 0;
}

// Fractional part of k*x computed with the rounding error of the product
// recovered by fma, so phases stay accurate for k up to 2^20.
inline double frac_product(double k, double x) noexcept {
  const double p = k * x;
  const double err = std::fma(k, x, -p);
  const double fl = std::floor(p);
  return (p - fl) + err;
}

inline Complex unit_phase(double k, double x) noexcept {
  const double t = kTwoPi * frac_product(k, x);
  return {std::cos(t), std::sin(t)};
}

class PeriodicScalar {
 public:
  PeriodicScalar() = default;

  explicit PeriodicScalar(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 8 || !is_power_of_two(values_.size())) {
      throw DomainError("PeriodicScalar: grid size must be a power of two >= 8, got " +
                        std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw DomainError("PeriodicScalar: non-finite grid value");
    }
  }

  static PeriodicScalar constant(std::size_t n, double c) {
    return PeriodicScalar(std::vector<double>(n, c));
  }

  static PeriodicScalar zeros(std::size_t n) { return constant(n, 0.0); }

  template <class Fn>
  static PeriodicScalar sample(std::size_t n, Fn&& fn) {
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = fn(static_cast<double>(j) / static_cast<double>(n));
    return PeriodicScalar(std::move(v));
  }

  std::size_t size() const noexcept { return values_.size(); }
  double node(std::size_t j) const noexcept {
    return static_cast<double>(j) / static_cast<double>(values_.size());
  }

  double operator[](std::size_t j) const noexcept { return values_[j]; }
  double& operator[](std::size_t j) noexcept { return values_[j]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  PeriodicScalar& operator+=(const PeriodicScalar& o) {
    check_same(o);
    for (std::size_t j = 0; j < size(); ++j) values_[j] += o.values_[j];
    return *this;
  }
  PeriodicScalar& operator-=(const PeriodicScalar& o) {
    check_same(o);
    for (std::size_t j = 0; j < size(); ++j) values_[j] -= o.values_[j];
    return *this;
  }
  PeriodicScalar& operator*=(const PeriodicScalar& o) {
    check_same(o);
    for (std::size_t j = 0; j < size(); ++j) values_[j] *= o.values_[j];
    return *this;
  }
  PeriodicScalar& operator+=(double c) noexcept {
    for (double& v : values_) v += c;
    return *this;
  }
  PeriodicScalar& operator*=(double c) noexcept {
    for (double& v : values_) v *= c;
    return *this;
  }

  friend PeriodicScalar operator+(PeriodicScalar a, const PeriodicScalar& b) { return a += b; }
  friend PeriodicScalar operator-(PeriodicScalar a, const PeriodicScalar& b) { return a -= b; }
  friend PeriodicScalar operator*(PeriodicScalar a, const PeriodicScalar& b) { return a *= b; }
  friend PeriodicScalar operator+(PeriodicScalar a, double c) { return a += c; }
  friend PeriodicScalar operator-(PeriodicScalar a, double c) { return a += -c; }
  friend PeriodicScalar operator*(PeriodicScalar a, double c) { return a *= c; }
  friend PeriodicScalar operator*(double c, PeriodicScalar a) { return a *= c; }
  friend PeriodicScalar operator-(PeriodicScalar a) { return a *= -1.0; }

 private:
  void check_same(const PeriodicScalar& o) const {
    if (o.size() != size()) throw DomainError("PeriodicScalar: grid size mismatch");
  }

  std::vector<double> values_;
};

inline double sup_norm(const PeriodicScalar& u) noexcept {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

// Coefficients c_0 .. c_{N/2}; negative modes are implied by Hermitian symmetry.
class FourierCoeffs {
 public:
  FourierCoeffs() = default;
  FourierCoeffs(std::size_t n, std::vector<Complex> half) : n_(n), half_(std::move(half)) {
    if (n_ < 8 || !is_power_of_two(n_) || half_.size() != n_ / 2 + 1) {
      throw DomainError("FourierCoeffs: inconsistent size");
    }
  }

  // Builds coefficients from the full list c_{-N/2+1} .. c_{N/2}, symmetrising
  // and rejecting input whose anti-Hermitian part exceeds 1e-10 of its size.
  static FourierCoeffs from_full(std::span<const Complex> full) {
    const std::size_t n = full.size();
    if (n < 8 || !is_power_of_two(n)) throw DomainError("FourierCoeffs: bad size");
    const long h = static_cast<long>(n / 2);
    auto at = [&](long k) { return full[static_cast<std::size_t>(k + h - 1)]; };
    double scale = 0.0;
    for (const Complex& c : full) scale = std::max(scale, std::abs(c));
    const double tol = 1e-10 * std::max(scale, 1.0);
    std::vector<Complex> half(n / 2 + 1);
    for (long k = 0; k <= h; ++k) {
      Complex ck = at(k);
      if (k == 0 || k == h) {
        if (std::abs(ck.imag()) > tol) {
          throw MalformedCoefficients("FourierCoeffs: self-conjugate mode k=" + std::to_string(k) +
                                      " has imaginary part");
        }
        half[static_cast<std::size_t>(k)] = {ck.real(), 0.0};
        continue;
      }
      const Complex cm = std::conj(at(-k));
      if (std::abs(ck - cm) > tol) {
        throw MalformedCoefficients("FourierCoeffs: Hermitian symmetry violated at k=" +
                                    std::to_string(k));
      }
      half[static_cast<std::size_t>(k)] = 0.5 * (ck + cm);
    }
    return FourierCoeffs(n, std::move(half));
  }

  std::size_t size() const noexcept { return n_; }
  long max_mode() const noexcept { return static_cast<long>(n_ / 2); }

  // Logical coefficient c_k for -N/2 < k <= N/2.
  Complex operator()(long k) const {
    if (k <= -max_mode() || k > max_mode()) throw DomainError("FourierCoeffs: mode out of range");
    return k >= 0 ? half_[static_cast<std::size_t>(k)] : std::conj(half_[static_cast<std::size_t>(-k)]);
  }

  std::span<const Complex> nonnegative() const noexcept { return half_; }
  std::span<Complex> nonnegative() noexcept { return half_; }

 private:
  std::size_t n_ = 0;
  std::vector<Complex> half_;
};

namespace detail {

struct FftPlan {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  FftPlan() = default;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

// FFTW planning is not thread-safe; execution with new arrays is.
inline const FftPlan& fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  auto plan = std::make_unique<FftPlan>();
  std::vector<double> re(n);
  std::vector<Complex> cx(n / 2 + 1);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int ni = static_cast<int>(n);
  plan->forward = fftw_plan_dft_r2c_1d(ni, re.data(), reinterpret_cast<fftw_complex*>(cx.data()), flags);
  plan->backward = fftw_plan_dft_c2r_1d(ni, reinterpret_cast<fftw_complex*>(cx.data()), re.data(),
                                        flags | FFTW_DESTROY_INPUT);
  const FftPlan& ref = *plan;
  cache.emplace(n, std::move(plan));
  return ref;
}

inline std::vector<Complex> forward_half(std::span<const double> values) {
  const std::size_t n = values.size();
  const FftPlan& plan = fft_plan(n);
  std::vector<double> in(values.begin(), values.end());
  std::vector<Complex> out(n / 2 + 1);
  fftw_execute_dft_r2c(plan.forward, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  const double inv = 1.0 / static_cast<double>(n);
  for (Complex& c : out) c *= inv;
  return out;
}

// Consumes the coefficient buffer.
inline std::vector<double> backward_half(std::vector<Complex>& half, std::size_t n) {
  const FftPlan& plan = fft_plan(n);
  std::vector<double> out(n);
  half[0].imag(0.0);
  half[n / 2].imag(0.0);
  fftw_execute_dft_c2r(plan.backward, reinterpret_cast<fftw_complex*>(half.data()), out.data());
  return out;
}

}  // namespace detail

inline FourierCoeffs analyze(const PeriodicScalar& u) {
  return FourierCoeffs(u.size(), detail::forward_half(u.values()));
}

inline PeriodicScalar synthesize(const FourierCoeffs& c) {
  auto half = std::vector<Complex>(c.nonnegative().begin(), c.nonnegative().end());
  double scale = 0.0;
  for (const Complex& z : half) scale = std::max(scale, std::abs(z));
  const double tol = 1e-10 * std::max(scale, 1.0);
  if (std::abs(half.front().imag()) > tol || std::abs(half.back().imag()) > tol) {
    throw MalformedCoefficients("synthesize: self-conjugate modes must be real");
  }
  return PeriodicScalar(detail::backward_half(half, c.size()));
}

namespace detail {

// Applies a per-mode multiplier m(k) for 0 < k < N/2 and a real factor to
// the Nyquist mode; c_0 is multiplied by m0.
template <class ModeFn>
PeriodicScalar apply_multiplier(const PeriodicScalar& u, Complex m0, ModeFn&& mode, double nyquist) {
  const std::size_t n = u.size();
  auto half = forward_half(u.values());
  half[0] *= m0;
  for (std::size_t k = 1; k < n / 2; ++k) half[k] *= mode(static_cast<double>(k));
  half[n / 2] *= nyquist;
  return PeriodicScalar(backward_half(half, n));
}

// Solves lambda xi(theta) - xi(theta+omega) = eta with |lambda| != 1.
inline PeriodicScalar solve_rotation_equation(const PeriodicScalar& eta, double lambda, double omega) {
  return apply_multiplier(
      eta, 1.0 / (lambda - 1.0),
      [&](double k) { return 1.0 / (lambda - unit_phase(k, omega)); }, 0.0);
}

}  // namespace detail

inline double average(const PeriodicScalar& u) noexcept {
  // Pairwise-free compensated sum keeps the grid mean equal to c_0 to round-off.
  double s = 0.0, comp = 0.0;
  for (double v : u.values()) {
    const double y = v - comp;
    const double t = s + y;
    comp = (t - s) - y;
    s = t;
  }
  return s / static_cast<double>(u.size());
}

// result(theta_j) = u(theta_j + delta).
inline PeriodicScalar shift(const PeriodicScalar& u, double delta) {
  if (delta == 0.0) return u;
  const double n = static_cast<double>(u.size());
  return detail::apply_multiplier(
      u, 1.0, [&](double k) { return unit_phase(k, delta); },
      std::cos(kTwoPi * frac_product(n / 2.0, delta)));
}

inline PeriodicScalar derivative(const PeriodicScalar& u) {
  return detail::apply_multiplier(
      u, 0.0, [](double k) { return Complex(0.0, kTwoPi * k); }, 0.0);
}

// sigma xi(theta) - xi(theta+omega) = eta, solved mode by mode.
inline PeriodicScalar solve_contractive(const PeriodicScalar& eta, double sigma, double omega) {
  if (!(std::abs(sigma) < 1.0)) {
    throw DomainError("solve_contractive: requires |sigma| < 1, got " + std::to_string(sigma));
  }
  return detail::solve_rotation_equation(eta, sigma, omega);
}

struct SmallDivisorSolution {
  PeriodicScalar xi;
  double average = 0.0;
};

inline constexpr double kSmallDivisorFloor = 1e-13;

// xi(theta) - xi(theta+omega) = eta(theta) - <eta>, <xi> = 0.
inline SmallDivisorSolution solve_small_divisor(const PeriodicScalar& eta, double omega) {
  const std::size_t n = eta.size();
  auto half = detail::forward_half(eta.values());
  const double avg = half[0].real();
  half[0] = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    const Complex d = 1.0 - unit_phase(static_cast<double>(k), omega);
    if (std::abs(d) < kSmallDivisorFloor) throw SmallDivisorOverflow(static_cast<long>(k), std::abs(d));
    half[k] /= d;
  }
  half[n / 2] = 0.0;
  return {PeriodicScalar(detail::backward_half(half, n)), avg};
}

// l1 mass of modes with |k| > (1-band) N/2 over the total l1 mass.
inline double tail_fraction(const PeriodicScalar& u, double band) {
  if (!(band > 0.0 && band < 1.0)) throw DomainError("tail_fraction: band must lie in (0,1)");
  const std::size_t n = u.size();
  const auto half = detail::forward_half(u.values());
  const double cut = (1.0 - band) * static_cast<double>(n / 2);
  double total = 0.0, tail = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double w = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    const double m = w * std::abs(half[k]);
    total += m;
    if (static_cast<double>(k) > cut) tail += m;
  }
  return total > 0.0 ? tail / total : 0.0;
}

// Zeroes every mode with |k| > keep * N/2 (Nyquist included).
inline PeriodicScalar low_pass(const PeriodicScalar& u, double keep) {
  if (!(keep > 0.0 && keep <= 1.0)) throw DomainError("low_pass: keep must lie in (0,1]");
  const std::size_t n = u.size();
  const double cut = keep * static_cast<double>(n / 2);
  return detail::apply_multiplier(
      u, 1.0, [cut](double k) { return Complex(k <= cut ? 1.0 : 0.0, 0.0); }, keep >= 1.0 ? 1.0 : 0.0);
}

inline PeriodicScalar resample(const PeriodicScalar& u, std::size_t n_new) {
  if (n_new < 8 || !is_power_of_two(n_new)) {
    throw DomainError("resample: target size must be a power of two >= 8");
  }
  const std::size_t n = u.size();
  if (n_new == n) return u;
  auto half = detail::forward_half(u.values());
  std::vector<Complex> out(n_new / 2 + 1, Complex(0.0, 0.0));
  if (n_new > n) {
    for (std::size_t k = 0; k < n / 2; ++k) out[k] = half[k];
    out[n / 2] = 0.5 * half[n / 2];
  } else {
    for (std::size_t k = 0; k < n_new / 2; ++k) out[k] = half[k];
    out[n_new / 2] = 2.0 * half[n_new / 2].real();
  }
  return PeriodicScalar(detail::backward_half(out, n_new));
}

}  // namespace ntwist
