#include <gtest/gtest.h>

#include <cmath>
#include <utility>

#include "ntwist/interpolation.hpp"

using namespace ntwist;

namespace {

const double kOmega = 0.5 * (std::sqrt(5.0) - 1.0);

InternalMap sine_map(std::size_t n, double shift, double amp, int order) {
  return InternalMap(PeriodicScalar::sample(n, [&](double t) { return shift + amp * std::sin(kTwoPi * t); }), order);
}

}  // namespace

TEST(Interp, ReproducesPolynomialsOfDegreeOrderMinusOne) {
  const std::size_t n = 64;
  for (int order : {2, 4, 6, 8}) {
    auto poly = [order](double t) {
      double v = 0.0, x = t - 0.5;
      for (int d = 0; d < order; ++d) v += (d + 1) * std::pow(x, d) * (d % 2 ? -0.3 : 0.7);
      return v;
    };
    const auto u = PeriodicScalar::sample(n, poly);
    for (double t : {0.3012, 0.45, 0.5, 0.617, 0.7333}) {
      EXPECT_NEAR(interp(u, t, order), poly(t), 1e-12) << order;
    }
  }
}

TEST(Interp, ExactAtNodesAndWrapsPeriodically) {
  const auto u = PeriodicScalar::sample(32, [](double t) { return std::exp(std::sin(kTwoPi * t)); });
  for (std::size_t j = 0; j < 32; ++j) {
    EXPECT_EQ(interp(u, u.node(j), 4), u[j]);
    EXPECT_NEAR(interp(u, u.node(j) + 3.0, 4), u[j], 1e-14);
    EXPECT_NEAR(interp(u, u.node(j) - 2.0, 6), u[j], 1e-14);
  }
}

TEST(Interp, SineAccuracyAtOrderFour) {
  const std::size_t n = 1024;
  const auto u = PeriodicScalar::sample(n, [](double t) { return std::sin(kTwoPi * t); });
  double err = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double t = (i + 0.37) / 20000.0;
    err = std::max(err, std::abs(interp(u, t, 4) - std::sin(kTwoPi * t)));
  }
  EXPECT_LE(err, 1e-9);
  EXPECT_LE(err, std::pow(kTwoPi, 4) / (24.0 * std::pow(static_cast<double>(n), 4)));
}

TEST(Interp, DerivativeAccuracy) {
  const std::size_t n = 512;
  const auto u = PeriodicScalar::sample(n, [](double t) { return std::cos(kTwoPi * 2 * t); });
  for (double t : {0.01, 0.333, 0.9}) {
    EXPECT_NEAR(interp_derivative(u, t, 8), -kTwoPi * 2 * std::sin(kTwoPi * 2 * t), 1e-9);
  }
  const auto d = grid_derivative(u, 8);
  for (std::size_t j = 0; j < n; j += 37) {
    EXPECT_NEAR(d[j], -kTwoPi * 2 * std::sin(kTwoPi * 2 * u.node(j)), 1e-9);
  }
}

TEST(Interp, RejectsBadOrders) {
  EXPECT_THROW(check_interpolation_order(3, 64), DomainError);
  EXPECT_THROW(check_interpolation_order(10, 64), DomainError);
  EXPECT_THROW(check_interpolation_order(8, 16), DomainError);
  EXPECT_NO_THROW(check_interpolation_order(4, 16));
}

TEST(InvertMap, RotationInvertsToOppositeRotation) {
  const auto f = InternalMap::rotation(256, kOmega, 4);
  const auto g = invert_map(f);
  for (std::size_t j = 0; j < 256; ++j) EXPECT_NEAR(g.displacement()[j], -kOmega, 1e-15);
}

TEST(InvertMap, CompositionResidual) {
  // g(f(t)) carries the interpolation error of g off its nodes.
  for (auto [order, tol] : {std::pair{4, 1e-9}, std::pair{8, 1e-11}}) {
    const auto f = sine_map(512, 0.3, 0.05, order);
    const auto g = invert_map(f);
    for (std::size_t j = 0; j < 512; ++j) {
      const double t = f.displacement().node(j);
      EXPECT_NEAR(g(f(t)), t, tol);
      EXPECT_NEAR(f(g(t)), t, 1e-11);
    }
  }
}

TEST(InvertMap, NonMonotoneMapIsRejected) {
  EXPECT_THROW(invert_map(sine_map(256, 0.3, 0.3, 4)), InversionError);
}

TEST(InternalMapTest, ImageLiftAndSlope) {
  const auto f = sine_map(128, 0.25, 0.05, 6);
  const auto lift = f.image_lift();
  const auto slope = f.slope_on_grid();
  for (std::size_t j = 0; j < 128; ++j) {
    const double t = f.displacement().node(j);
    EXPECT_NEAR(lift[j], t + 0.25 + 0.05 * std::sin(kTwoPi * t), 1e-15);
    EXPECT_NEAR(slope[j], 1.0 + 0.05 * kTwoPi * std::cos(kTwoPi * t), 1e-8);
    EXPECT_NEAR(f.slope(t + 0.5 / 128), 1.0 + 0.05 * kTwoPi * std::cos(kTwoPi * (t + 0.5 / 128)), 1e-7);
  }
}
