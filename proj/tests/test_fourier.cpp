#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ntwist/fourier.hpp"

using namespace ntwist;

namespace {

const double kOmega = 0.5 * (std::sqrt(5.0) - 1.0);

PeriodicScalar random_smooth(std::size_t n, unsigned seed, int kmax = 20, double decay = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n, g(rng));
  for (int k = 1; k <= kmax; ++k) {
    const double c = g(rng) * std::exp(-decay * k), s = g(rng) * std::exp(-decay * k);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = kTwoPi * k * static_cast<double>(j) / static_cast<double>(n);
      v[j] += c * std::cos(t) + s * std::sin(t);
    }
  }
  return PeriodicScalar(std::move(v));
}

PeriodicScalar random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return PeriodicScalar(std::move(v));
}

PeriodicScalar cos1(std::size_t n) {
  return PeriodicScalar::sample(n, [](double t) { return std::cos(kTwoPi * t); });
}
PeriodicScalar sin1(std::size_t n) {
  return PeriodicScalar::sample(n, [](double t) { return std::sin(kTwoPi * t); });
}

}  // namespace

TEST(PeriodicScalar, RejectsBadSizesAndValues) {
  EXPECT_THROW(PeriodicScalar(std::vector<double>(12, 0.0)), DomainError);
  EXPECT_THROW(PeriodicScalar(std::vector<double>(4, 0.0)), DomainError);
  std::vector<double> v(16, 0.0);
  v[3] = std::nan("");
  EXPECT_THROW(PeriodicScalar(std::move(v)), DomainError);
  EXPECT_NO_THROW(PeriodicScalar(std::vector<double>(8, 0.0)));
}

TEST(Analyze, ConstantFunction) {
  const auto c = analyze(PeriodicScalar::constant(32, 1.0));
  EXPECT_NEAR(c(0).real(), 1.0, 1e-15);
  for (long k = 1; k <= 16; ++k) EXPECT_LT(std::abs(c(k)), 1e-15);
}

TEST(Analyze, SingleCosineMode) {
  const auto c = analyze(cos1(64));
  EXPECT_NEAR(std::abs(c(1) - Complex(0.5, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(c(-1) - Complex(0.5, 0.0)), 0.0, 1e-15);
  for (long k = 2; k <= 32; ++k) EXPECT_LT(std::abs(c(k)), 1e-15);
}

TEST(Analyze, RoundTripRandom) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto u = random_values(256, seed);
    const auto w = synthesize(analyze(u));
    EXPECT_LE(sup_norm(w - u), 1e-12 * sup_norm(u));
  }
}

TEST(Analyze, HermitianSymmetry) {
  const auto c = analyze(random_values(64, 9));
  for (long k = 1; k < 32; ++k) EXPECT_LT(std::abs(c(-k) - std::conj(c(k))), 1e-15);
}

TEST(Synthesize, ConstantAndSine) {
  // Index i holds c_k with k = i - N/2 + 1.
  std::vector<Complex> full(64, Complex(0.0, 0.0));
  full[31] = 3.0;
  EXPECT_LE(sup_norm(synthesize(FourierCoeffs::from_full(full)) - PeriodicScalar::constant(64, 3.0)), 1e-15);

  std::vector<Complex> s(64, Complex(0.0, 0.0));
  s[32] = Complex(0.0, -0.5);  // c_1
  s[30] = Complex(0.0, 0.5);   // c_{-1}
  EXPECT_LE(sup_norm(synthesize(FourierCoeffs::from_full(s)) - sin1(64)), 1e-15);
}

TEST(Synthesize, RejectsNonHermitian) {
  std::vector<Complex> full(32, Complex(0.0, 0.0));
  full[17] = Complex(1.0, 0.0);  // c_2
  full[13] = Complex(0.0, 1.0);  // c_{-2}
  EXPECT_THROW(FourierCoeffs::from_full(full), MalformedCoefficients);
  std::vector<Complex> z(32, Complex(0.0, 0.0));
  z[15] = Complex(1.0, 1e-3);  // c_0
  EXPECT_THROW(FourierCoeffs::from_full(z), MalformedCoefficients);
}

TEST(Shift, IdentityQuarterAndInverse) {
  const auto u = random_smooth(128, 3);
  EXPECT_LE(sup_norm(shift(u, 0.0) - u), 0.0);
  EXPECT_LE(sup_norm(shift(cos1(64), 0.25) + sin1(64)), 1e-12);
  EXPECT_LE(sup_norm(shift(shift(u, 0.37), -0.37) - u), 1e-12 * sup_norm(u));
}

TEST(Shift, GroupAction) {
  const auto u = random_smooth(128, 4);
  for (double d1 : {0.1, kOmega, -0.77}) {
    for (double d2 : {0.3, 1.0 / 7.0}) {
      EXPECT_LE(sup_norm(shift(u, d1 + d2) - shift(shift(u, d1), d2)), 1e-12 * sup_norm(u));
    }
  }
}

TEST(Shift, MatchesPointwiseEvaluationOfBandLimitedFunction) {
  const std::size_t n = 64;
  auto f = [](double t) { return std::sin(kTwoPi * 3 * t) + 0.25 * std::cos(kTwoPi * 7 * t + 0.3); };
  const auto s = shift(PeriodicScalar::sample(n, f), kOmega);
  for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(s[j], f(static_cast<double>(j) / n + kOmega), 1e-13);
}

TEST(Derivative, ConstantsSineAndAverage) {
  EXPECT_LE(sup_norm(derivative(PeriodicScalar::constant(32, 2.5))), 0.0);
  EXPECT_LE(sup_norm(derivative(sin1(64)) - cos1(64) * kTwoPi), 1e-10);
  EXPECT_NEAR(average(derivative(random_values(128, 5))), 0.0, 1e-14);
}

TEST(Derivative, CommutesWithShift) {
  const auto u = random_smooth(128, 6);
  EXPECT_LE(sup_norm(derivative(shift(u, kOmega)) - shift(derivative(u), kOmega)), 1e-10);
}

TEST(Average, BasicIdentities) {
  EXPECT_NEAR(average(sin1(64)), 0.0, 1e-16);
  const auto u = random_values(64, 7);
  EXPECT_NEAR(average(u + 2.0), average(u) + 2.0, 1e-15);
  EXPECT_NEAR(average(u), analyze(u)(0).real(), 1e-14);
}

TEST(SolveContractive, ConstantMode) {
  const auto xi = solve_contractive(PeriodicScalar::constant(32, 1.5), 0.8, kOmega);
  EXPECT_LE(sup_norm(xi + 7.5), 1e-13);
}

TEST(SolveContractive, FirstModeByResidualAndCoefficient) {
  const auto eta = cos1(64);
  const auto xi = solve_contractive(eta, 0.8, kOmega);
  EXPECT_LE(sup_norm(xi * 0.8 - shift(xi, kOmega) - eta), 1e-11);
  const Complex expected = 0.5 / (0.8 - unit_phase(1.0, kOmega));
  EXPECT_LT(std::abs(analyze(xi)(1) - expected), 1e-14);
}

TEST(SolveContractive, Linearity) {
  const auto e1 = random_smooth(128, 8), e2 = random_smooth(128, 9);
  const auto lhs = solve_contractive(e1 * 2.0 + e2 * -0.5, 0.8, kOmega);
  const auto rhs = solve_contractive(e1, 0.8, kOmega) * 2.0 + solve_contractive(e2, 0.8, kOmega) * -0.5;
  EXPECT_LE(sup_norm(lhs - rhs), 1e-12 * sup_norm(lhs));
}

TEST(SolveContractive, RejectsNonContractive) {
  EXPECT_THROW(solve_contractive(cos1(16), 1.0, kOmega), DomainError);
  EXPECT_THROW(solve_contractive(cos1(16), -1.2, kOmega), DomainError);
}

TEST(SolveContractive, ResidualPropertyOnRandomInputs) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> us(0.05, 0.95), uw(0.0, 1.0);
  for (unsigned trial = 0; trial < 40; ++trial) {
    const double sigma = us(rng), omega = uw(rng);
    const auto eta = random_smooth(256, 100 + trial);
    const auto xi = solve_contractive(eta, sigma, omega);
    EXPECT_LE(sup_norm(xi * sigma - shift(xi, omega) - eta), 1e-11 * sup_norm(eta)) << trial;
  }
}

TEST(SolveContractive, AgreesWithFixedPointIterationOnRotation) {
  // sigma xi - xi(theta+omega) = eta  <=>  xi(phi) = -eta(phi-omega) + sigma xi(phi-omega).
  const std::size_t n = 512;
  const auto eta = random_smooth(n, 11);
  const double sigma = 0.8;
  const auto exact = solve_contractive(eta, sigma, kOmega);
  PeriodicScalar xi = PeriodicScalar::zeros(n);
  const auto rhs = shift(eta, -kOmega) * -1.0;
  for (int it = 0; it < 400; ++it) {
    const auto next = rhs + shift(xi, -kOmega) * sigma;
    const double d = sup_norm(next - xi);
    xi = next;
    if (d < 1e-12) break;
  }
  EXPECT_LE(sup_norm(xi - exact), 1e-10);
}

TEST(SolveSmallDivisor, ConstantInput) {
  const auto r = solve_small_divisor(PeriodicScalar::constant(32, 0.7), kOmega);
  EXPECT_LE(sup_norm(r.xi), 0.0);
  EXPECT_NEAR(r.average, 0.7, 1e-16);
}

TEST(SolveSmallDivisor, SineByResidual) {
  const auto eta = sin1(64);
  const auto r = solve_small_divisor(eta, kOmega);
  EXPECT_LE(sup_norm(r.xi - shift(r.xi, kOmega) - eta), 1e-10);
  const Complex expected = analyze(eta)(1) / (1.0 - unit_phase(1.0, kOmega));
  EXPECT_LT(std::abs(analyze(r.xi)(1) - expected), 1e-14);
}

TEST(SolveSmallDivisor, ResonanceRaisesWithMode) {
  const auto eta = PeriodicScalar::sample(32, [](double t) { return std::cos(kTwoPi * 3 * t); });
  try {
    solve_small_divisor(eta, 1.0 / 3.0);
    FAIL() << "expected small divisor overflow";
  } catch (const SmallDivisorOverflow& e) {
    EXPECT_EQ(e.mode() % 3, 0);
  }
}

TEST(SolveSmallDivisor, ResidualPropertyOnRandomInputs) {
  for (unsigned trial = 0; trial < 30; ++trial) {
    const auto eta = random_smooth(256, 200 + trial);
    const auto r = solve_small_divisor(eta, kOmega);
    EXPECT_LE(sup_norm(r.xi - shift(r.xi, kOmega) - (eta - r.average)), 1e-10 * sup_norm(eta));
    EXPECT_LE(std::abs(average(r.xi)), 1e-13);
    EXPECT_NEAR(r.average, average(eta), 1e-14);
  }
}

TEST(TailFraction, LowModeNyquistAndBounds) {
  EXPECT_LE(tail_fraction(cos1(64), 0.25), 1e-15);
  const auto nyq = PeriodicScalar::sample(64, [](double t) { return std::cos(kTwoPi * 32 * t); });
  EXPECT_NEAR(tail_fraction(nyq, 0.25), 1.0, 1e-15);
  const auto w = random_values(128, 12);
  double prev = 0.0;
  for (double band : {0.1, 0.25, 0.5, 0.9}) {
    const double t = tail_fraction(w, band);
    EXPECT_GT(t, 0.0);
    EXPECT_LT(t, 1.0);
    EXPECT_GE(t, prev);
    prev = t;
  }
  EXPECT_EQ(tail_fraction(PeriodicScalar::zeros(16), 0.25), 0.0);
  EXPECT_THROW(tail_fraction(w, 0.0), DomainError);
}

TEST(Resample, IdentityPadTruncateAndRefine) {
  const auto u = random_values(64, 13);
  EXPECT_LE(sup_norm(resample(u, 64) - u), 0.0);
  EXPECT_LE(sup_norm(resample(resample(u, 256), 64) - u), 1e-12 * sup_norm(u));
  EXPECT_LE(sup_norm(resample(cos1(32), 64) - cos1(64)), 1e-12);
  EXPECT_THROW(resample(u, 48), DomainError);
}

TEST(LowPass, KeepsLowModesDropsHigh) {
  const std::size_t n = 64;
  const auto lo = PeriodicScalar::sample(n, [](double t) { return std::sin(kTwoPi * 5 * t); });
  const auto hi = PeriodicScalar::sample(n, [](double t) { return std::cos(kTwoPi * 30 * t); });
  EXPECT_LE(sup_norm(low_pass(lo + hi, 0.875) - lo), 1e-13);
  EXPECT_LE(sup_norm(low_pass(hi, 1.0) - hi), 1e-14);
}
