#pragma once

// Newton method for an invariant circle K with free internal dynamics f,
//
//   F(K(theta)) - K(f(theta)) = 0,
//
// on a uniform grid with local Lagrange interpolation.  No parameter is
// adjusted.  Rotation numbers of the resulting circle maps come from weighted
// Birkhoff averages, and sweep_parameter follows a circle through a parameter
// range recording rho.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"
#include "ntwist/frame.hpp"
#include "ntwist/interpolation.hpp"
#include "ntwist/maps.hpp"

namespace ntwist {

struct GeneralState {
  TorusEmbedding K;  // grid values, interpolated locally
  InternalMap f;
  ParamPoint params;
  double invariance_error = 0.0;
  int iterations = 0;
  std::vector<double> error_history;

  std::size_t size() const noexcept { return K.size(); }
};

// A rigid-rotation state (e.g. from the quasi-periodic solver) on a grid of n
// nodes; K is resampled spectrally when n differs.
inline GeneralState general_from_rotation(const TorusEmbedding& K, const ParamPoint& p, double omega,
                                          std::size_t n, int order = 4) {
  GeneralState s{K.size() == n ? K : K.resampled(n), InternalMap::rotation(n, omega, order), p, 0.0, 0, {}};
  return s;
}

struct GeneralSettings {
  double tol = 1e-10;
  int max_iterations = 20;
  double fixed_point_tol = 1e-12;
  int fixed_point_cap = -1;  // -1: 10 log(tol) / log(sigma)
};

namespace detail {

// K(f(theta_j)) on the lift.
inline std::pair<std::vector<double>, std::vector<double>> compose_embedding(const TorusEmbedding& K,
                                                                             const GridDynamics& dyn) {
  const std::size_t n = K.size();
  const PeriodicScalar ex = dyn.compose(K.eta_x), ey = dyn.compose(K.ky);
  const std::vector<double> fl = dyn.image_lift(n);
  std::vector<double> x(n), y(n);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = fl[j] + ex[j];
    y[j] = ey[j];
  }
  return {std::move(x), std::move(y)};
}

inline VecField general_invariance_error(const MapOnCircle& map, const TorusEmbedding& K, const GridDynamics& dyn) {
  auto [x, y] = compose_embedding(K, dyn);
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = map.jets[j].x_lift - x[j];
    y[j] = map.jets[j].y - y[j];
  }
  return {PeriodicScalar(std::move(x)), PeriodicScalar(std::move(y))};
}

}  // namespace detail

inline double general_invariance_sup(const MapFamily& family, const GeneralState& s) {
  const GridDynamics dyn(s.f);
  const VecField E = detail::general_invariance_error(evaluate_on_circle(family, s.params, s.K), s.K, dyn);
  return std::max(sup_norm(E.x), sup_norm(E.y));
}

// Solves (sigma/f') xi - xi o f = eta by iterating
//   xi(phi) = -eta(f^{-1} phi) + sigma / f'(f^{-1} phi) xi(f^{-1} phi).
inline PeriodicScalar solve_stable_fixed_point(const PeriodicScalar& eta, const PeriodicScalar& lambda_normal,
                                               const InternalMap& f, double sigma, double tol = 1e-12,
                                               int cap = -1) {
  if (cap < 0) cap = static_cast<int>(std::ceil(10.0 * std::log(tol) / std::log(sigma)));
  const InternalMap finv = invert_map(f);
  const GridDynamics back(finv);
  const PeriodicScalar rhs = back.compose(eta) * -1.0;
  const PeriodicScalar weight = back.compose(lambda_normal);
  const double scale = std::max(1.0, sup_norm(rhs));
  PeriodicScalar xi = rhs;
  for (int it = 0; it < cap; ++it) {
    PeriodicScalar next = back.compose(xi);
    next *= weight;
    next += rhs;
    double diff = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) diff = std::max(diff, std::abs(next[j] - xi[j]));
    xi = std::move(next);
    if (diff <= tol * scale) return xi;
  }
  throw ContractionFailure("stable fixed point: no contraction within " + std::to_string(cap) + " iterations");
}

struct GeneralStepReport {
  double invariance_error = 0.0;  // before the step
  double reducibility_error = 0.0;
  double min_angle = 0.0;
};

// One step of the four-stage update: E, frame, projections, then
// Delta f = -eta^L (xi^L = 0) and K + N xi^N.
inline GeneralStepReport newton_step_general(const MapFamily& family, GeneralState& s,
                                             const GeneralSettings& set = {}) {
  const GridDynamics dyn(s.f);
  const MapOnCircle map = evaluate_on_circle(family, s.params, s.K);
  const VecField E = detail::general_invariance_error(map, s.K, dyn);
  GeneralStepReport rep;
  rep.invariance_error = std::max(sup_norm(E.x), sup_norm(E.y));
  const double sigma = family.sigma();
  const AdaptedFrame fr = build_frame(map, s.K, dyn, sigma);
  rep.reducibility_error = reducibility_error(map, fr, dyn).sup;
  rep.min_angle = min_angle(fr.vartheta, fr.gram);

  const std::size_t n = s.size();
  const PeriodicScalar lxf = dyn.compose(fr.L.x), lyf = dyn.compose(fr.L.y);
  const PeriodicScalar nxf = dyn.compose(fr.normal.x), nyf = dyn.compose(fr.normal.y);
  std::vector<double> el(n), en(n);
  for (std::size_t j = 0; j < n; ++j) {
    el[j] = -omega_form({nxf[j], nyf[j]}, E.at(j));
    en[j] = omega_form({lxf[j], lyf[j]}, E.at(j));
  }
  const PeriodicScalar xi_n = solve_stable_fixed_point(PeriodicScalar(std::move(en)), fr.lambda_normal, s.f, sigma,
                                                       set.fixed_point_tol, set.fixed_point_cap);
  s.K.eta_x += fr.normal.x * xi_n;
  s.K.ky += fr.normal.y * xi_n;
  s.f.displacement() -= PeriodicScalar(std::move(el));
  return rep;
}

inline GeneralState newton_solve_general(const MapFamily& family, GeneralState s, const GeneralSettings& set = {}) {
  s.error_history.clear();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    const double err = general_invariance_sup(family, s);
    s.error_history.push_back(err);
    if (err <= set.tol) {
      s.invariance_error = err;
      s.iterations = it;
      return s;
    }
    if (!std::isfinite(err) || err > 1.0 || (it >= 1 && err > 100.0 * prev)) {
      throw Divergence("newton_solve_general: iteration diverged", err, 0.0, 0.0);
    }
    if (it >= set.max_iterations) {
      throw Divergence("newton_solve_general: no convergence within " + std::to_string(it) + " iterations", err,
                       0.0, 0.0);
    }
    prev = err;
    try {
      newton_step_general(family, s, set);
    } catch (const InversionError& e) {
      throw Divergence(std::string("newton_solve_general: ") + e.what(), err, 0.0, 0.0);
    } catch (const FrameDegeneracy& e) {
      throw Divergence(std::string("newton_solve_general: ") + e.what(), err, 0.0, 0.0);
    } catch (const DegenerateCircle& e) {
      throw Divergence(std::string("newton_solve_general: ") + e.what(), err, 0.0, 0.0);
    }
  }
}

struct RotationNumber {
  double rho = 0.0;
  double error = 0.0;  // difference of the last two estimates
  std::size_t iterates = 0;
};

inline constexpr std::size_t kMaxRotationIterates = std::size_t{1} << 22;

// Weighted Birkhoff average of the displacement g along an orbit, with
// w(t) = exp(-1/(t(1-t))) and M doubled until two estimates agree within tol.
// The orbit is kept in [0,1) so displacements carry full precision.
inline RotationNumber rotation_number(const std::function<double(double)>& displacement, double tol = 1e-12,
                                      std::size_t m0 = 1024, std::size_t m_max = kMaxRotationIterates,
                                      double theta0 = 0.0) {
  std::vector<double> d;
  d.reserve(m0);
  double theta = theta0 - std::floor(theta0);
  auto extend = [&](std::size_t m) {
    while (d.size() < m) {
      const double g = displacement(theta);
      d.push_back(g);
      theta += g;
      theta -= std::floor(theta);
    }
  };
  auto estimate = [&](std::size_t m) {
    double num = 0.0, den = 0.0;
    const double mm = static_cast<double>(m);
    for (std::size_t k = 1; k < m; ++k) {
      const double t = static_cast<double>(k) / mm;
      const double w = std::exp(-1.0 / (t * (1.0 - t)));
      num += w * d[k];
      den += w;
    }
    return num / den;
  };
  std::size_t m = m0;
  extend(m);
  double prev = estimate(m);
  double err = std::numeric_limits<double>::infinity();
  while (2 * m <= m_max) {
    m *= 2;
    extend(m);
    const double cur = estimate(m);
    err = std::abs(cur - prev);
    prev = cur;
    if (err <= tol) return {cur, err, m};
  }
  throw ToleranceNotMet("rotation_number: estimates did not agree within " + std::to_string(tol), prev);
}

inline RotationNumber rotation_number(const InternalMap& f, double tol = 1e-12) {
  const PeriodicScalar& g = f.displacement();
  const int order = f.order();
  return rotation_number([&](double theta) { return interp(g, theta, order); }, tol);
}

struct RationalLock {
  bool locked = false;
  long p = 0;
  long q = 1;
};

// Nearest p/q with q <= q_max, if within tol.
inline RationalLock detect_lock(double rho, long q_max = 64, double tol = 1e-9) {
  RationalLock best;
  double dist = std::numeric_limits<double>::infinity();
  for (long q = 1; q <= q_max; ++q) {
    const long p = std::lround(rho * static_cast<double>(q));
    const double d = std::abs(rho - static_cast<double>(p) / static_cast<double>(q));
    if (d < dist - 1e-15) {
      dist = d;
      best = {d < tol, p, q};
    }
  }
  if (!best.locked) return {false, 0, 1};
  const long g = std::gcd(best.p, best.q);
  return {true, best.p / g, best.q / g};
}

enum class SweepParameter { a, mu };

struct SweepRow {
  double param = 0.0;
  double rho = 0.0;
  double rho_error = 0.0;
  double invariance_error = 0.0;
  RationalLock lock;
};

struct SweepSettings {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.01;
  double edge_resolution = 1e-4;
  double rho_tol = 1e-10;
  long lock_q_max = 64;
  long crossing_q_max = 10;  // rationals searched for between unlocked samples
  double lock_tol = 1e-9;
  GeneralSettings newton;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by param
  std::string stop_low;        // reason the downward sweep stopped early, empty if it reached lo
  std::string stop_high;
};

namespace detail {

inline double& swept(ParamPoint& p, SweepParameter which) { return which == SweepParameter::a ? p.a : p.mu; }

inline RotationNumber sweep_rotation(const GeneralState& s, const SweepSettings& set) {
  try {
    return rotation_number(s.f, set.rho_tol);
  } catch (const ToleranceNotMet& e) {
    return {e.best_estimate(), std::numeric_limits<double>::quiet_NaN(), kMaxRotationIterates};
  }
}

inline SweepRow sweep_row(const GeneralState& s, SweepParameter which, const SweepSettings& set) {
  const RotationNumber r = sweep_rotation(s, set);
  ParamPoint p = s.params;
  SweepRow row{swept(p, which), r.rho, r.error, s.invariance_error, {}};
  if (std::isfinite(r.rho)) row.lock = detect_lock(r.rho, set.lock_q_max, set.lock_tol);
  return row;
}

inline bool same_lock(const RationalLock& u, const RationalLock& v) {
  return u.locked == v.locked && (!u.locked || (u.p == v.p && u.q == v.q));
}

}  // namespace detail

namespace detail {

// Smallest-denominator rational strictly between u and v with q <= q_max.
inline std::optional<std::pair<long, long>> rational_between(double u, double v, long q_max) {
  if (!(std::isfinite(u) && std::isfinite(v))) return std::nullopt;
  const double lo = std::min(u, v), hi = std::max(u, v);
  for (long q = 1; q <= q_max; ++q) {
    const long p = static_cast<long>(std::floor(lo * static_cast<double>(q))) + 1;
    if (static_cast<double>(p) / static_cast<double>(q) < hi) return std::make_pair(p, q);
  }
  return std::nullopt;
}

}  // namespace detail

// Sweeps one parameter from a converged start in both directions with warm
// starts.  Between unlocked neighbours whose rotation numbers bracket a
// low-denominator rational, the parameter is bisected on rho - p/q to look for
// a plateau; then every interval whose end points differ in locking status is
// bisected until it is shorter than edge_resolution.
inline SweepResult sweep_parameter(const MapFamily& family, const GeneralState& start, SweepParameter which,
                                   const SweepSettings& set) {
  if (!(set.step > 0.0) || !(set.lo <= set.hi)) throw DomainError("sweep_parameter: bad range or step");
  SweepResult out;
  GeneralState s0 = newton_solve_general(family, start, set.newton);
  ParamPoint p0 = s0.params;
  const double c = detail::swept(p0, which);
  if (c < set.lo || c > set.hi) throw DomainError("sweep_parameter: start outside the sweep range");

  struct Node {
    SweepRow row;
    GeneralState state;
  };
  std::vector<Node> up{{detail::sweep_row(s0, which, set), s0}};
  std::vector<Node> down;

  auto march = [&](double dir, double limit, std::vector<Node>& nodes, std::string& reason) {
    GeneralState cur = s0;
    for (long k = 1;; ++k) {
      double v = c + dir * static_cast<double>(k) * set.step;
      if (dir * (v - limit) > 1e-12 * std::max(1.0, std::abs(limit))) break;
      GeneralState trial = cur;
      detail::swept(trial.params, which) = v;
      try {
        cur = newton_solve_general(family, std::move(trial), set.newton);
      } catch (const Error& e) {
        reason = e.what();
        return;
      }
      nodes.push_back({detail::sweep_row(cur, which, set), cur});
    }
  };
  march(1.0, set.hi, up, out.stop_high);
  march(-1.0, set.lo, down, out.stop_low);

  std::vector<Node> all(down.rbegin(), down.rend());
  all.insert(all.end(), std::make_move_iterator(up.begin()), std::make_move_iterator(up.end()));

  auto solve_at = [&](const Node& from, double param) -> std::optional<Node> {
    GeneralState trial = from.state;
    detail::swept(trial.params, which) = param;
    try {
      GeneralState s = newton_solve_general(family, std::move(trial), set.newton);
      SweepRow row = detail::sweep_row(s, which, set);
      return Node{row, std::move(s)};
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  // Plateau search between unlocked neighbours.
  std::vector<Node> refined;
  for (std::size_t i = 0; i < all.size(); ++i) {
    refined.push_back(all[i]);
    if (i + 1 == all.size() || all[i].row.lock.locked || all[i + 1].row.lock.locked) continue;
    const auto pq = detail::rational_between(all[i].row.rho, all[i + 1].row.rho, set.crossing_q_max);
    if (!pq) continue;
    const double target = static_cast<double>(pq->first) / static_cast<double>(pq->second);
    const bool rising = all[i + 1].row.rho > all[i].row.rho;
    Node left = all[i], right = all[i + 1];
    std::vector<Node> inner;
    while (std::abs(right.row.param - left.row.param) > set.edge_resolution) {
      auto m = solve_at(left, 0.5 * (left.row.param + right.row.param));
      if (!m) break;
      inner.push_back(*m);
      if (m->row.lock.locked) break;
      if ((m->row.rho < target) == rising) {
        left = std::move(*m);
      } else {
        right = std::move(*m);
      }
    }
    std::sort(inner.begin(), inner.end(), [](const Node& u, const Node& v) { return u.row.param < v.row.param; });
    refined.insert(refined.end(), std::make_move_iterator(inner.begin()), std::make_move_iterator(inner.end()));
  }
  all = std::move(refined);

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < all.size(); ++i) {
    rows.push_back(all[i].row);
    if (i + 1 == all.size() || detail::same_lock(all[i].row.lock, all[i + 1].row.lock)) continue;
    // Localize the edge between all[i] and all[i+1].
    Node left = all[i], right = all[i + 1];
    std::vector<SweepRow> inner;
    while (std::abs(right.row.param - left.row.param) > set.edge_resolution) {
      auto m = solve_at(left, 0.5 * (left.row.param + right.row.param));
      if (!m) break;
      inner.push_back(m->row);
      if (detail::same_lock(m->row.lock, left.row.lock)) {
        left = std::move(*m);
      } else {
        right = std::move(*m);
      }
    }
    std::sort(inner.begin(), inner.end(), [](const SweepRow& u, const SweepRow& v) { return u.param < v.param; });
    rows.insert(rows.end(), inner.begin(), inner.end());
  }
  out.rows = std::move(rows);
  return out;
}

// Normal contraction estimate sigma exp(-2 <log f'>) on the grid.
inline double normal_contraction(const InternalMap& f, double sigma) {
  const PeriodicScalar fp = f.slope_on_grid();
  double acc = 0.0;
  for (std::size_t j = 0; j < fp.size(); ++j) acc += std::log(fp[j]);
  return sigma * std::exp(-2.0 * acc / static_cast<double>(fp.size()));
}

}  // namespace ntwist
