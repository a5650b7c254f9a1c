#pragma once

// Adapted symplectic frame along an (approximately) invariant circle K with
// internal dynamics f, and the observables built on it.
//
//   L  = K'                         tangent
//   N0 = Omega L / (L^T L)          unit-area normal
//   t0 = N0(f)^T Omega DF(K) N0     torsion of N0
//   N  = L vartheta + N0            invariant normal, vartheta kills t0
//   P  = (L N),  det P = 1,  P(f)^{-1} DF(K) P ~ diag(f', sigma/f')
//
// The frame is generic over the representation of the dynamics: a rigid
// rotation acting spectrally, or a grid map acting by local interpolation.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"
#include "ntwist/interpolation.hpp"
#include "ntwist/maps.hpp"

namespace ntwist {

// K(theta) = (theta + eta_x(theta), K_y(theta)).
struct TorusEmbedding {
  PeriodicScalar eta_x;
  PeriodicScalar ky;

  static TorusEmbedding zero_section(std::size_t n) {
    return {PeriodicScalar::zeros(n), PeriodicScalar::zeros(n)};
  }

  std::size_t size() const noexcept { return eta_x.size(); }
  Point at(std::size_t j) const noexcept { return {eta_x.node(j) + eta_x[j], ky[j]}; }

  TorusEmbedding resampled(std::size_t n) const { return {resample(eta_x, n), resample(ky, n)}; }
};

struct VecField {
  PeriodicScalar x;
  PeriodicScalar y;

  std::size_t size() const noexcept { return x.size(); }
  Vec2 at(std::size_t j) const noexcept { return {x[j], y[j]}; }
};

// Dynamics policies.  compose(u) returns u o f on the grid, differentiate(u)
// returns u' in the matching representation, image_lift() the values f(theta_j)
// on the real line and slope() the values f'(theta_j).
template <class D>
concept CircleDynamics = requires(const D& d, const PeriodicScalar& u, std::size_t n) {
  { d.compose(u) } -> std::same_as<PeriodicScalar>;
  { d.differentiate(u) } -> std::same_as<PeriodicScalar>;
  { d.image_lift(n) } -> std::same_as<std::vector<double>>;
  { d.slope(n) } -> std::same_as<PeriodicScalar>;
};

struct RigidRotation {
  double omega = 0.0;

  PeriodicScalar compose(const PeriodicScalar& u) const { return shift(u, omega); }
  PeriodicScalar differentiate(const PeriodicScalar& u) const { return derivative(u); }
  std::vector<double> image_lift(std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<double>(j) / static_cast<double>(n) + omega;
    return out;
  }
  PeriodicScalar slope(std::size_t n) const { return PeriodicScalar::constant(n, 1.0); }
};

// Internal dynamics known on a grid; functions are composed by interpolation.
class GridDynamics {
 public:
  explicit GridDynamics(InternalMap f) : f_(std::move(f)) {
    stencils_.reserve(f_.size());
    for (std::size_t j = 0; j < f_.size(); ++j) {
      stencils_.push_back(make_stencil(f_.displacement().node(j) + f_.displacement()[j], f_.size(), f_.order()));
    }
  }

  const InternalMap& map() const noexcept { return f_; }
  int order() const noexcept { return f_.order(); }

  PeriodicScalar compose(const PeriodicScalar& u) const {
    std::vector<double> out(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) out[j] = apply_stencil(stencils_[j], u.values());
    return PeriodicScalar(std::move(out));
  }
  PeriodicScalar differentiate(const PeriodicScalar& u) const { return grid_derivative(u, f_.order()); }
  std::vector<double> image_lift(std::size_t) const { return f_.image_lift(); }
  PeriodicScalar slope(std::size_t) const { return f_.slope_on_grid(); }

 private:
  InternalMap f_;
  std::vector<Stencil> stencils_;
};

static_assert(CircleDynamics<RigidRotation>);
static_assert(CircleDynamics<GridDynamics>);

// The map and its derivatives evaluated at every node of K.
struct MapOnCircle {
  std::vector<MapJet> jets;

  std::size_t size() const noexcept { return jets.size(); }
};

inline MapOnCircle evaluate_on_circle(const MapFamily& family, const ParamPoint& p, const TorusEmbedding& K) {
  MapOnCircle out;
  out.jets.resize(K.size());
  for (std::size_t j = 0; j < K.size(); ++j) out.jets[j] = family.jet(K.at(j), p);
  return out;
}

template <CircleDynamics D>
VecField tangent(const TorusEmbedding& K, const D& dyn) {
  return {dyn.differentiate(K.eta_x) + 1.0, dyn.differentiate(K.ky)};
}

inline VecField tangent(const TorusEmbedding& K) { return {derivative(K.eta_x) + 1.0, derivative(K.ky)}; }

struct Normal0 {
  VecField n0;
  PeriodicScalar gram;
};

inline constexpr double kDegenerateGram = 1e-12;

inline Normal0 normal0(const VecField& L) {
  const std::size_t n = L.size();
  std::vector<double> nx(n), ny(n), g(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double gram = L.x[j] * L.x[j] + L.y[j] * L.y[j];
    if (!(gram >= kDegenerateGram)) {
      throw DegenerateCircle("normal0: degenerate tangent at node " + std::to_string(j));
    }
    nx[j] = -L.y[j] / gram;
    ny[j] = L.x[j] / gram;
    g[j] = gram;
  }
  return {{PeriodicScalar(std::move(nx)), PeriodicScalar(std::move(ny))}, PeriodicScalar(std::move(g))};
}

template <CircleDynamics D>
PeriodicScalar torsion0(const MapOnCircle& map, const VecField& n0, const D& dyn) {
  const VecField n0f{dyn.compose(n0.x), dyn.compose(n0.y)};
  std::vector<double> t(n0.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    t[j] = omega_form(n0f.at(j), map.jets[j].jacobian * n0.at(j));
  }
  return PeriodicScalar(std::move(t));
}

template <CircleDynamics D>
PeriodicScalar torsion0(const TorusEmbedding& K, const VecField& n0, const MapFamily& family,
                        const ParamPoint& p, const D& dyn) {
  return torsion0(evaluate_on_circle(family, p, K), n0, dyn);
}

// vartheta(theta) - sigma vartheta(theta+omega) = -t0(theta), in Fourier space.
inline PeriodicScalar vartheta_qp(const PeriodicScalar& t0, double sigma, double omega) {
  if (!(std::abs(sigma) < 1.0) || sigma == 0.0) throw DomainError("vartheta_qp: sigma must lie in (0,1)");
  // Divide by sigma: (1/sigma) v - v(theta+omega) = -t0/sigma.
  return detail::solve_rotation_equation(t0 * (-1.0 / sigma), 1.0 / sigma, omega);
}

inline constexpr double kSeriesTolerance = 1e-13;

inline int default_series_cap(double sigma, double tol = kSeriesTolerance) {
  return static_cast<int>(std::ceil(10.0 * std::log(tol) / std::log(sigma)));
}

// vartheta = -sum_k T^k (t0/f'),  (T u)(theta) = sigma / f'(theta)^2 u(f(theta)).
template <CircleDynamics D>
PeriodicScalar vartheta_general(const PeriodicScalar& t0, const D& dyn, double sigma,
                                double tol = kSeriesTolerance, int kmax = -1) {
  if (kmax < 0) kmax = default_series_cap(sigma, tol);
  const std::size_t n = t0.size();
  const PeriodicScalar fp = dyn.slope(n);
  std::vector<double> weight(n), first(n);
  for (std::size_t j = 0; j < n; ++j) {
    weight[j] = sigma / (fp[j] * fp[j]);
    first[j] = t0[j] / fp[j];
  }
  PeriodicScalar term(std::move(first));
  PeriodicScalar sum = term;
  const double scale = std::max(1.0, sup_norm(term));
  for (int k = 1; k <= kmax; ++k) {
    if (sup_norm(term) <= tol * scale) return -sum;
    term = dyn.compose(term);
    for (std::size_t j = 0; j < n; ++j) term[j] *= weight[j];
    sum += term;
  }
  if (sup_norm(term) <= tol * scale) return -sum;
  throw ContractionFailure("vartheta_general: series terms did not decay within " + std::to_string(kmax) +
                           " terms");
}

struct AdaptedFrame {
  VecField L;
  VecField n0;
  PeriodicScalar gram;
  PeriodicScalar t0;
  PeriodicScalar vartheta;
  VecField normal;
  PeriodicScalar lambda_tangent;  // f'
  PeriodicScalar lambda_normal;   // sigma / f'

  std::size_t size() const noexcept { return L.size(); }
  double det_p(std::size_t j) const noexcept { return L.x[j] * normal.y[j] - L.y[j] * normal.x[j]; }
};

inline constexpr double kFrameDetTolerance = 1e-8;

inline AdaptedFrame assemble_frame(const VecField& L, const Normal0& n0, const PeriodicScalar& vartheta,
                                   PeriodicScalar t0, PeriodicScalar lambda_tangent,
                                   PeriodicScalar lambda_normal) {
  const std::size_t n = L.size();
  std::vector<double> nx(n), ny(n);
  for (std::size_t j = 0; j < n; ++j) {
    nx[j] = L.x[j] * vartheta[j] + n0.n0.x[j];
    ny[j] = L.y[j] * vartheta[j] + n0.n0.y[j];
    const double det = L.x[j] * ny[j] - L.y[j] * nx[j];
    if (!(std::abs(det - 1.0) <= kFrameDetTolerance)) {
      throw FrameDegeneracy("assemble_frame: det P = " + std::to_string(det) + " at node " + std::to_string(j));
    }
  }
  return {L,
          n0.n0,
          n0.gram,
          std::move(t0),
          vartheta,
          {PeriodicScalar(std::move(nx)), PeriodicScalar(std::move(ny))},
          std::move(lambda_tangent),
          std::move(lambda_normal)};
}

inline AdaptedFrame assemble_frame(const VecField& L, const Normal0& n0, const PeriodicScalar& vartheta) {
  const std::size_t n = L.size();
  return assemble_frame(L, n0, vartheta, PeriodicScalar::zeros(n), PeriodicScalar::constant(n, 1.0),
                        PeriodicScalar::constant(n, 1.0));
}

// Full frame along K for a rigid rotation, vartheta solved spectrally.
inline AdaptedFrame build_frame(const MapOnCircle& map, const TorusEmbedding& K, const RigidRotation& rot,
                                double sigma) {
  const VecField L = tangent(K, rot);
  const Normal0 n0 = normal0(L);
  PeriodicScalar t0 = torsion0(map, n0.n0, rot);
  const PeriodicScalar vt = vartheta_qp(t0, sigma, rot.omega);
  const std::size_t n = K.size();
  return assemble_frame(L, n0, vt, std::move(t0), PeriodicScalar::constant(n, 1.0),
                        PeriodicScalar::constant(n, sigma));
}

// Full frame along K for grid dynamics, vartheta summed as a series.
inline AdaptedFrame build_frame(const MapOnCircle& map, const TorusEmbedding& K, const GridDynamics& dyn,
                                double sigma) {
  const VecField L = tangent(K, dyn);
  const Normal0 n0 = normal0(L);
  PeriodicScalar t0 = torsion0(map, n0.n0, dyn);
  const PeriodicScalar vt = vartheta_general(t0, dyn, sigma);
  PeriodicScalar fp = dyn.slope(K.size());
  std::vector<double> ln(fp.size());
  for (std::size_t j = 0; j < ln.size(); ++j) ln[j] = sigma / fp[j];
  return assemble_frame(L, n0, vt, std::move(t0), std::move(fp), PeriodicScalar(std::move(ln)));
}

struct ReducibilityError {
  // E_r = DF(K) P - P(f) Lambda, entry by entry.
  PeriodicScalar xx, xy, yx, yy;
  double sup = 0.0;
};

template <CircleDynamics D>
ReducibilityError reducibility_error(const MapOnCircle& map, const AdaptedFrame& fr, const D& dyn) {
  const std::size_t n = fr.size();
  const PeriodicScalar lxf = dyn.compose(fr.L.x), lyf = dyn.compose(fr.L.y);
  const PeriodicScalar nxf = dyn.compose(fr.normal.x), nyf = dyn.compose(fr.normal.y);
  std::vector<double> xx(n), xy(n), yx(n), yy(n);
  double sup = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Mat2& J = map.jets[j].jacobian;
    const Vec2 dl = J * fr.L.at(j);
    const Vec2 dn = J * fr.normal.at(j);
    xx[j] = dl.x - lxf[j] * fr.lambda_tangent[j];
    yx[j] = dl.y - lyf[j] * fr.lambda_tangent[j];
    xy[j] = dn.x - nxf[j] * fr.lambda_normal[j];
    yy[j] = dn.y - nyf[j] * fr.lambda_normal[j];
    sup = std::max({sup, std::abs(xx[j]), std::abs(xy[j]), std::abs(yx[j]), std::abs(yy[j])});
  }
  return {PeriodicScalar(std::move(xx)), PeriodicScalar(std::move(xy)), PeriodicScalar(std::move(yx)),
          PeriodicScalar(std::move(yy)), sup};
}

// Smallest angle between tangent and invariant normal bundles:
// min |arctan(1 / (vartheta * L^T L))|, pi/2 where vartheta vanishes.
inline double min_angle(const PeriodicScalar& vartheta, const PeriodicScalar& gram) {
  double alpha = std::numbers::pi / 2.0;
  for (std::size_t j = 0; j < vartheta.size(); ++j) {
    const double q = vartheta[j] * gram[j];
    if (q == 0.0) continue;
    alpha = std::min(alpha, std::abs(std::atan(1.0 / q)));
  }
  return alpha;
}

// <N(f(theta))^T Omega v(theta)> for a parameter derivative v of the map.
template <CircleDynamics D, class Select>
double parameter_twist(const MapOnCircle& map, const VecField& normal, const D& dyn, Select&& select) {
  const PeriodicScalar nxf = dyn.compose(normal.x), nyf = dyn.compose(normal.y);
  std::vector<double> b(normal.size());
  for (std::size_t j = 0; j < b.size(); ++j) b[j] = omega_form({nxf[j], nyf[j]}, select(map.jets[j]));
  return average(PeriodicScalar(std::move(b)));
}

template <CircleDynamics D>
double twist_a(const MapOnCircle& map, const VecField& normal, const D& dyn) {
  return parameter_twist(map, normal, dyn, [](const MapJet& j) { return j.d_a; });
}

template <CircleDynamics D>
double twist_mu(const MapOnCircle& map, const VecField& normal, const D& dyn) {
  return parameter_twist(map, normal, dyn, [](const MapJet& j) { return j.d_mu; });
}

inline double twist_a(const TorusEmbedding& K, const VecField& normal, const MapFamily& family,
                      const ParamPoint& p, double omega) {
  return twist_a(evaluate_on_circle(family, p, K), normal, RigidRotation{omega});
}

inline double twist_mu(const TorusEmbedding& K, const VecField& normal, const MapFamily& family,
                       const ParamPoint& p, double omega) {
  return twist_mu(evaluate_on_circle(family, p, K), normal, RigidRotation{omega});
}

struct Diagnostics {
  double invariance_error_sup = 0.0;
  double reducibility_error_sup = 0.0;
  double min_angle = 0.0;
  double twist_a = 0.0;
  double twist_mu = 0.0;
  double contraction = 0.0;
  double tail = 0.0;
  std::size_t mode_count = 0;
};

}  // namespace ntwist
