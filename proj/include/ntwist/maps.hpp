#pragma once

// Conformally symplectic map families F_{a,mu,eps} on the annulus T x R with
// a constant conformal factor sigma, i.e. det DF = sigma everywhere.

#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <string>

#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"

namespace ntwist {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Row-major 2x2 matrix.
struct Mat2 {
  double xx = 0.0, xy = 0.0;
  double yx = 0.0, yy = 0.0;

  double det() const noexcept { return xx * yy - xy * yx; }
  Vec2 operator*(Vec2 v) const noexcept { return {xx * v.x + xy * v.y, yx * v.x + yy * v.y}; }
};

// v^T Omega w with Omega = [[0,-1],[1,0]].
inline constexpr double omega_form(Vec2 v, Vec2 w) noexcept { return -v.x * w.y + v.y * w.x; }

struct ParamPoint {
  double a = 0.0;    // adjusting parameter
  double mu = 0.0;   // unfolding parameter
  double eps = 0.0;  // perturbation parameter
};

// Image of a point: x reduced to [0,1) for storage plus the un-reduced lift.
struct MapImage {
  double x = 0.0;
  double x_lift = 0.0;
  double y = 0.0;
};

// Everything the solvers need at one point, evaluated in a single call.
struct MapJet {
  double x_lift = 0.0;
  double y = 0.0;
  Mat2 jacobian;
  Vec2 d_a;
  Vec2 d_mu;
  Vec2 d_eps;
};

class MapFamily {
 public:
  virtual ~MapFamily() = default;

  virtual MapImage eval(Point z, const ParamPoint& p) const = 0;
  virtual Mat2 jacobian(Point z, const ParamPoint& p) const = 0;
  virtual Vec2 d_a(Point z, const ParamPoint& p) const = 0;
  virtual Vec2 d_mu(Point z, const ParamPoint& p) const = 0;
  virtual Vec2 d_eps(Point z, const ParamPoint& p) const = 0;
  virtual double sigma() const noexcept = 0;
  virtual std::string name() const = 0;

  virtual MapJet jet(Point z, const ParamPoint& p) const {
    const MapImage img = eval(z, p);
    return {img.x_lift, img.y, jacobian(z, p), d_a(z, p), d_mu(z, p), d_eps(z, p)};
  }
};

inline double wrap_unit(double x) noexcept {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

class Forcing {
 public:
  enum class Variant { symmetric, nonsymmetric };

  explicit Forcing(Variant v = Variant::symmetric) : variant_(v) {}

  Variant variant() const noexcept { return variant_; }

  // p(x) = (sin 2 pi x [+ cos 4 pi x]) / 2 pi
  double value(double x) const noexcept {
    double s = std::sin(kTwoPi * x);
    if (variant_ == Variant::nonsymmetric) s += std::cos(2.0 * kTwoPi * x);
    return s / kTwoPi;
  }

  double derivative(double x) const noexcept {
    double d = std::cos(kTwoPi * x);
    if (variant_ == Variant::nonsymmetric) d -= 2.0 * std::sin(2.0 * kTwoPi * x);
    return d;
  }

  std::string name() const { return variant_ == Variant::symmetric ? "symmetric" : "nonsymmetric"; }

 private:
  Variant variant_;
};

// Dissipative standard non-twist map
//   x' = x + (sigma y + eps p(x) - a)^2 + mu,   y' = sigma y + eps p(x).
class DissipativeStandardNontwist final : public MapFamily {
 public:
  DissipativeStandardNontwist(double sigma, Forcing forcing) : sigma_(sigma), forcing_(forcing) {
    if (!(sigma > 0.0 && sigma < 1.0)) {
      throw DomainError("dissipative standard non-twist map: sigma must lie in (0,1), got " +
                        std::to_string(sigma));
    }
  }

  MapImage eval(Point z, const ParamPoint& p) const override {
    const double yn = sigma_ * z.y + p.eps * forcing_.value(z.x);
    const double s = yn - p.a;
    const double xl = z.x + s * s + p.mu;
    return {wrap_unit(xl), xl, yn};
  }

  Mat2 jacobian(Point z, const ParamPoint& p) const override {
    const double pp = p.eps * forcing_.derivative(z.x);
    const double s = sigma_ * z.y + p.eps * forcing_.value(z.x) - p.a;
    return {1.0 + 2.0 * s * pp, 2.0 * s * sigma_, pp, sigma_};
  }

  Vec2 d_a(Point z, const ParamPoint& p) const override {
    const double s = sigma_ * z.y + p.eps * forcing_.value(z.x) - p.a;
    return {-2.0 * s, 0.0};
  }

  Vec2 d_mu(Point, const ParamPoint&) const override { return {1.0, 0.0}; }

  Vec2 d_eps(Point z, const ParamPoint& p) const override {
    const double pv = forcing_.value(z.x);
    const double s = sigma_ * z.y + p.eps * pv - p.a;
    return {2.0 * s * pv, pv};
  }

  MapJet jet(Point z, const ParamPoint& p) const override {
    const double pv = forcing_.value(z.x);
    const double pd = p.eps * forcing_.derivative(z.x);
    const double yn = sigma_ * z.y + p.eps * pv;
    const double s = yn - p.a;
    MapJet j;
    j.x_lift = z.x + s * s + p.mu;
    j.y = yn;
    j.jacobian = {1.0 + 2.0 * s * pd, 2.0 * s * sigma_, pd, sigma_};
    j.d_a = {-2.0 * s, 0.0};
    j.d_mu = {1.0, 0.0};
    j.d_eps = {2.0 * s * pv, pv};
    return j;
  }

  double sigma() const noexcept override { return sigma_; }
  std::string name() const override { return "dsntm-" + forcing_.name(); }
  const Forcing& forcing() const noexcept { return forcing_; }

 private:
  double sigma_;
  Forcing forcing_;
};

inline MapImage dsntm_eval(Point z, const ParamPoint& p, const Forcing& f, double sigma) {
  return DissipativeStandardNontwist(sigma, f).eval(z, p);
}

inline Mat2 dsntm_jacobian(Point z, const ParamPoint& p, const Forcing& f, double sigma) {
  return DissipativeStandardNontwist(sigma, f).jacobian(z, p);
}

// S(x, y) = (x - 1/2, -y).
inline Point symmetry_involution(Point z) noexcept { return {z.x - 0.5, -z.y}; }

// Distance on T x R, x measured modulo 1.
inline double annulus_distance(Point u, Point v) noexcept {
  double dx = u.x - v.x;
  dx -= std::round(dx);
  return std::max(std::abs(dx), std::abs(u.y - v.y));
}

struct SymmetryReport {
  double max_deviation = 0.0;
  std::size_t samples = 0;
};

// Max over random points of dist(S o F_{a} o S (z), F_{-a}(z)).
inline SymmetryReport check_symmetry(const Forcing& forcing, const ParamPoint& p, std::size_t samples,
                                     double sigma = 0.8, unsigned seed = 12345) {
  const DissipativeStandardNontwist family(sigma, forcing);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(-1.0, 1.0);
  const ParamPoint mirrored{-p.a, p.mu, p.eps};
  SymmetryReport rep{0.0, samples};
  for (std::size_t i = 0; i < samples; ++i) {
    const Point z{ux(rng), uy(rng)};
    const Point sz = symmetry_involution(z);
    const MapImage fsz = family.eval(sz, p);
    const Point lhs = symmetry_involution({fsz.x_lift, fsz.y});
    const MapImage rhs = family.eval(z, mirrored);
    rep.max_deviation = std::max(rep.max_deviation, annulus_distance(lhs, {rhs.x_lift, rhs.y}));
  }
  return rep;
}

}  // namespace ntwist
