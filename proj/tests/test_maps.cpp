#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ntwist/maps.hpp"

using namespace ntwist;

namespace {

const Forcing kSym(Forcing::Variant::symmetric);
const Forcing kNonsym(Forcing::Variant::nonsymmetric);

struct Sample {
  Point z;
  ParamPoint p;
};

std::vector<Sample> random_samples(std::size_t count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(-1.0, 1.0), ua(-0.3, 0.3), ue(0.0, 3.0);
  std::vector<Sample> out(count);
  for (auto& s : out) s = {{ux(rng), uy(rng)}, {ua(rng), ux(rng), ue(rng)}};
  return out;
}

double rel(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace

TEST(Dsntm, DirectEvaluationAtZeroEps) {
  const ParamPoint p{0.1, 0.2, 0.0};
  const MapImage a = dsntm_eval({0.25, 0.0}, p, kSym, 0.8);
  EXPECT_NEAR(a.x, 0.46, 1e-15);
  EXPECT_NEAR(a.y, 0.0, 1e-15);
  const MapImage b = dsntm_eval({0.25, 0.5}, p, kSym, 0.8);
  EXPECT_NEAR(b.y, 0.4, 1e-15);
  EXPECT_NEAR(b.x, 0.54, 1e-15);
}

TEST(Dsntm, ZeroSectionInvariantAtZeroEps) {
  const ParamPoint p{0.13, 0.41, 0.0};
  const double rot = p.a * p.a + p.mu;
  for (int j = 0; j < 64; ++j) {
    const double t = j / 64.0;
    const MapImage im = dsntm_eval({t, 0.0}, p, kNonsym, 0.8);
    EXPECT_NEAR(im.x_lift, t + rot, 1e-15);
    EXPECT_EQ(im.y, 0.0);
  }
}

TEST(Dsntm, RejectsSigmaOutsideUnitInterval) {
  EXPECT_THROW(DissipativeStandardNontwist(1.0, kSym), DomainError);
  EXPECT_THROW(DissipativeStandardNontwist(0.0, kSym), DomainError);
}

TEST(Dsntm, JacobianAtZeroEps) {
  const double sigma = 0.8;
  const ParamPoint p{0.1, 0.3, 0.0};
  const Point z{0.7, 0.35};
  const Mat2 m = dsntm_jacobian(z, p, kSym, sigma);
  EXPECT_DOUBLE_EQ(m.xx, 1.0);
  EXPECT_NEAR(m.xy, 2.0 * sigma * (sigma * z.y - p.a), 1e-15);
  EXPECT_DOUBLE_EQ(m.yx, 0.0);
  EXPECT_DOUBLE_EQ(m.yy, sigma);
}

TEST(Dsntm, DeterminantEqualsSigma) {
  for (const Forcing& f : {kSym, kNonsym}) {
    const DissipativeStandardNontwist fam(0.8, f);
    for (const auto& s : random_samples(1000, 21)) EXPECT_NEAR(fam.jacobian(s.z, s.p).det(), 0.8, 1e-12);
  }
}

TEST(Dsntm, DerivativesMatchCentralDifferences) {
  const double h = 1e-6;
  for (const Forcing& f : {kSym, kNonsym}) {
    const DissipativeStandardNontwist fam(0.8, f);
    for (const auto& s : random_samples(200, 22)) {
      auto ev = [&](Point z, ParamPoint p) {
        const MapImage m = fam.eval(z, p);
        return Vec2{m.x_lift, m.y};
      };
      auto diff = [&](Vec2 u, Vec2 v) { return Vec2{(u.x - v.x) / (2 * h), (u.y - v.y) / (2 * h)}; };
      const Mat2 J = fam.jacobian(s.z, s.p);
      const Vec2 dx = diff(ev({s.z.x + h, s.z.y}, s.p), ev({s.z.x - h, s.z.y}, s.p));
      const Vec2 dy = diff(ev({s.z.x, s.z.y + h}, s.p), ev({s.z.x, s.z.y - h}, s.p));
      EXPECT_LE(rel(J.xx, dx.x), 1e-6);
      EXPECT_LE(rel(J.yx, dx.y), 1e-6);
      EXPECT_LE(rel(J.xy, dy.x), 1e-6);
      EXPECT_LE(rel(J.yy, dy.y), 1e-6);

      ParamPoint pp = s.p, pm = s.p;
      pp.a += h;
      pm.a -= h;
      const Vec2 da = diff(ev(s.z, pp), ev(s.z, pm)), an_a = fam.d_a(s.z, s.p);
      EXPECT_LE(rel(an_a.x, da.x), 1e-6);
      EXPECT_LE(rel(an_a.y, da.y), 1e-6);
      pp = pm = s.p;
      pp.mu += h;
      pm.mu -= h;
      const Vec2 dm = diff(ev(s.z, pp), ev(s.z, pm)), an_m = fam.d_mu(s.z, s.p);
      EXPECT_LE(rel(an_m.x, dm.x), 1e-6);
      EXPECT_LE(rel(an_m.y, dm.y), 1e-6);
      pp = pm = s.p;
      pp.eps += h;
      pm.eps -= h;
      const Vec2 de = diff(ev(s.z, pp), ev(s.z, pm)), an_e = fam.d_eps(s.z, s.p);
      EXPECT_LE(rel(an_e.x, de.x), 1e-6);
      EXPECT_LE(rel(an_e.y, de.y), 1e-6);
    }
  }
}

TEST(Dsntm, JetAgreesWithSeparateCalls) {
  const DissipativeStandardNontwist fam(0.7, kNonsym);
  for (const auto& s : random_samples(50, 23)) {
    const MapJet j = fam.jet(s.z, s.p);
    const MapImage m = fam.eval(s.z, s.p);
    const Mat2 J = fam.jacobian(s.z, s.p);
    EXPECT_EQ(j.x_lift, m.x_lift);
    EXPECT_EQ(j.y, m.y);
    EXPECT_EQ(j.jacobian.xy, J.xy);
    EXPECT_EQ(j.d_a.x, fam.d_a(s.z, s.p).x);
    EXPECT_EQ(j.d_eps.x, fam.d_eps(s.z, s.p).x);
  }
}

TEST(Dsntm, PeriodicInXAndLiftConsistent) {
  const DissipativeStandardNontwist fam(0.8, kNonsym);
  for (const auto& s : random_samples(200, 24)) {
    const MapImage m0 = fam.eval(s.z, s.p);
    const MapImage m1 = fam.eval({s.z.x + 1.0, s.z.y}, s.p);
    EXPECT_NEAR((m1.x_lift - (s.z.x + 1.0)) - (m0.x_lift - s.z.x), 0.0, 1e-12);
    EXPECT_NEAR(m0.y, m1.y, 1e-12);
    const double k = m0.x_lift - m0.x;
    EXPECT_NEAR(k, std::round(k), 1e-12);
    EXPECT_GE(m0.x, 0.0);
    EXPECT_LT(m0.x, 1.0);
  }
}

TEST(Forcing, SymmetricVariantIsOddUnderHalfShift) {
  for (int j = 0; j < 100; ++j) {
    const double x = j / 100.0 + 0.003;
    EXPECT_NEAR(kSym.value(x - 0.5), -kSym.value(x), 1e-14);
    EXPECT_NEAR(kSym.value(x + 1.0), kSym.value(x), 1e-14);
    EXPECT_NEAR(kNonsym.value(x + 1.0), kNonsym.value(x), 1e-14);
  }
  EXPECT_GT(std::abs(kNonsym.value(0.1 - 0.5) + kNonsym.value(0.1)), 1e-3);
}

TEST(Symmetry, SymmetricFamilySatisfiesIdentity) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> ua(-0.3, 0.3), ue(0.0, 3.0), um(0.0, 1.0);
  for (int i = 0; i < 5; ++i) {
    const ParamPoint p{ua(rng), um(rng), ue(rng)};
    EXPECT_LE(check_symmetry(kSym, p, 1000).max_deviation, 1e-12);
  }
  EXPECT_LE(check_symmetry(kSym, {0.0, 0.6, 2.0}, 1000).max_deviation, 1e-12);
}

TEST(Symmetry, NonsymmetricFamilyBreaksIt) {
  EXPECT_GT(check_symmetry(kNonsym, {0.0, 0.6, 1.0}, 1000).max_deviation, 1e-3);
}

TEST(Symmetry, InvolutionSquaresToIdentity) {
  const Point z{0.3, -0.2};
  const Point w = symmetry_involution(symmetry_involution(z));
  EXPECT_LE(annulus_distance(z, w), 1e-15);
}

TEST(OmegaForm, StandardSymplecticPairing) {
  EXPECT_DOUBLE_EQ(omega_form({1.0, 0.0}, {0.0, 1.0}), -1.0);
  EXPECT_DOUBLE_EQ(omega_form({0.0, 1.0}, {1.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(omega_form({0.3, 0.4}, {0.3, 0.4}), 0.0);
}
