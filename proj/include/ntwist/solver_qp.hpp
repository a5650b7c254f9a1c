#pragma once

// Newton method for (K, a, mu) solving, at fixed eps and fixed Diophantine
// omega,
//
//   F(K(theta); a, mu, eps) - K(theta + omega) = 0     invariance
//   <K^x(theta) - theta>                        = 0     phase
//   b_a(K; a, mu, eps) - b_a^0                  = 0     a-twist
//
// Each iteration reduces the linearised invariance equation to two scalar
// cohomological equations in the adapted frame (tangential, with small
// divisors; normal, contractive), picks delta_mu from the tangential
// averages, and closes the twist equation with one Steffensen step in
// delta_a.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"
#include "ntwist/frame.hpp"
#include "ntwist/maps.hpp"

namespace ntwist {

inline const double kGoldenMean = 0.5 * (std::sqrt(5.0) - 1.0);

struct QpTolerances {
  double invariance = 1e-11;
  double phase = 1e-11;
  double twist = 1e-11;
};

struct ModePolicy {
  std::size_t n_min = 64;
  std::size_t n_max = 16384;
  double tail_band = 0.25;
  double tail_double = 1e-9;
  double tail_halve = 1e-16;
  // Newton corrections keep |k| <= correction_band N/2; the modes next to
  // Nyquist are otherwise unstable under collocation.
  double correction_band = 0.875;
};

struct NewtonLimits {
  int max_iterations = 15;
  double mu_twist_floor = 1e-8;
  double a_nondegeneracy_floor = 1e-8;
  // Smallest |h| used as the Steffensen probe; h = g(0) otherwise.
  double probe_floor = 1e-8;
};

struct QpProblem {
  std::shared_ptr<const MapFamily> family;
  double omega = kGoldenMean;
  double target_twist = 0.0;
  QpTolerances tol;
  ModePolicy modes;
  NewtonLimits limits;

  double sigma() const noexcept { return family->sigma(); }

  void validate() const {
    if (!family) throw DomainError("QpProblem: no map family");
    if (!std::isfinite(omega) || !std::isfinite(target_twist)) throw DomainError("QpProblem: non-finite omega or twist");
    if (!(tol.invariance > 0.0 && tol.phase > 0.0 && tol.twist > 0.0)) {
      throw DomainError("QpProblem: tolerances must be positive");
    }
    if (!is_power_of_two(modes.n_min) || !is_power_of_two(modes.n_max) || modes.n_min < 8 ||
        modes.n_min > modes.n_max) {
      throw DomainError("QpProblem: mode bounds must be powers of two with 8 <= n_min <= n_max");
    }
    if (limits.max_iterations < 1) throw DomainError("QpProblem: max_iterations must be positive");
  }
};

struct QpState {
  TorusEmbedding K;
  ParamPoint params;
  Diagnostics diag;
  int iterations = 0;
  // max(|E|, |e_p|, |e_b|) before each Newton step, last entry converged.
  std::vector<double> error_history;

  std::size_t size() const noexcept { return K.size(); }
};

// The eps = 0 circle: K = zero section, a = b_a^0/2, mu = omega - a^2.
inline QpState integrable_state(const QpProblem& pb, std::size_t n) {
  QpState s;
  s.K = TorusEmbedding::zero_section(n);
  const double a = 0.5 * pb.target_twist;
  s.params = {a, pb.omega - a * a, 0.0};
  return s;
}

struct QpResiduals {
  VecField E;
  double phase = 0.0;
  double twist = 0.0;
  double invariance_sup = 0.0;
};

namespace detail {

inline VecField invariance_error(const MapOnCircle& map, const TorusEmbedding& K, double omega) {
  const std::size_t n = K.size();
  const PeriodicScalar ex = shift(K.eta_x, omega);
  const PeriodicScalar ey = shift(K.ky, omega);
  std::vector<double> x(n), y(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = static_cast<double>(j) / static_cast<double>(n);
    // Lift of K^x(theta + omega) is theta + omega + eta_x(theta + omega).
    x[j] = (map.jets[j].x_lift - theta - omega) - ex[j];
    y[j] = map.jets[j].y - ey[j];
  }
  return {PeriodicScalar(std::move(x)), PeriodicScalar(std::move(y))};
}

// Everything computed at one (K, a, mu, eps).
struct QpEvaluation {
  MapOnCircle map;
  AdaptedFrame frame;
  VecField N_shifted;
  double twist_a = 0.0;
  double twist_mu = 0.0;
};

inline QpEvaluation evaluate_frame(const QpProblem& pb, const TorusEmbedding& K, const ParamPoint& p) {
  const RigidRotation rot{pb.omega};
  QpEvaluation ev;
  ev.map = evaluate_on_circle(*pb.family, p, K);
  ev.frame = build_frame(ev.map, K, rot, pb.sigma());
  ev.N_shifted = {shift(ev.frame.normal.x, pb.omega), shift(ev.frame.normal.y, pb.omega)};
  const std::size_t n = K.size();
  std::vector<double> ba(n), bm(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 nf = ev.N_shifted.at(j);
    ba[j] = omega_form(nf, ev.map.jets[j].d_a);
    bm[j] = omega_form(nf, ev.map.jets[j].d_mu);
  }
  ev.twist_a = average(PeriodicScalar(std::move(ba)));
  ev.twist_mu = average(PeriodicScalar(std::move(bm)));
  return ev;
}

inline double twist_at(const QpProblem& pb, const TorusEmbedding& K, const ParamPoint& p) {
  return evaluate_frame(pb, K, p).twist_a;
}

}  // namespace detail

inline QpResiduals residuals(const QpProblem& pb, const QpState& s) {
  const auto ev = detail::evaluate_frame(pb, s.K, s.params);
  QpResiduals r;
  r.E = detail::invariance_error(ev.map, s.K, pb.omega);
  r.phase = average(s.K.eta_x);
  r.twist = ev.twist_a - pb.target_twist;
  r.invariance_sup = std::max(sup_norm(r.E.x), sup_norm(r.E.y));
  return r;
}

// Right-hand sides of the linearised equation projected on the frame.
struct NewtonWorkspace {
  VecField E;
  PeriodicScalar eta_l, eta_n;
  PeriodicScalar b_l_a, b_n_a, b_l_mu, b_n_mu;
};

// eta = -P(theta+omega)^{-1} rhs, B_a = P(theta+omega)^{-1} D_aF, same for mu.
inline NewtonWorkspace project_on_frame(const detail::QpEvaluation& ev, const VecField& rhs, double omega) {
  const std::size_t n = rhs.size();
  const VecField Lf{shift(ev.frame.L.x, omega), shift(ev.frame.L.y, omega)};
  std::vector<double> el(n), en(n), bla(n), bna(n), blm(n), bnm(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 nf = ev.N_shifted.at(j);
    const Vec2 lf = Lf.at(j);
    const Vec2 e = rhs.at(j);
    const MapJet& jet = ev.map.jets[j];
    el[j] = -omega_form(nf, e);
    en[j] = omega_form(lf, e);
    bla[j] = omega_form(nf, jet.d_a);
    bna[j] = -omega_form(lf, jet.d_a);
    blm[j] = omega_form(nf, jet.d_mu);
    bnm[j] = -omega_form(lf, jet.d_mu);
  }
  NewtonWorkspace ws;
  ws.E = rhs;
  ws.eta_l = PeriodicScalar(std::move(el));
  ws.eta_n = PeriodicScalar(std::move(en));
  ws.b_l_a = PeriodicScalar(std::move(bla));
  ws.b_n_a = PeriodicScalar(std::move(bna));
  ws.b_l_mu = PeriodicScalar(std::move(blm));
  ws.b_n_mu = PeriodicScalar(std::move(bnm));
  return ws;
}

// The correction as an affine function of delta_a:
//   dK = dK0 + delta_a dK1,  delta_mu = mu0 + delta_a mu1.
struct AffineCorrection {
  VecField dk0, dk1;
  PeriodicScalar xi_l0, xi_l1, xi_n0, xi_n1;
  double mu0 = 0.0;
  double mu1 = 0.0;

  VecField dk(double da) const { return {dk0.x + dk1.x * da, dk0.y + dk1.y * da}; }
  double dmu(double da) const noexcept { return mu0 + mu1 * da; }
};

inline AffineCorrection prepare_step(const NewtonWorkspace& ws, const AdaptedFrame& fr, double phase_error,
                                     double omega, double sigma, double mu_twist_floor) {
  const double bl_mu = average(ws.b_l_mu);
  if (!(std::abs(bl_mu) >= mu_twist_floor)) {
    throw MuDegeneracy("newton step: mu-twist " + std::to_string(bl_mu) + " below floor");
  }
  AffineCorrection c;
  c.mu0 = average(ws.eta_l) / bl_mu;
  c.mu1 = -average(ws.b_l_a) / bl_mu;

  const PeriodicScalar rn_eta = solve_contractive(ws.eta_n, sigma, omega);
  const PeriodicScalar rn_a = solve_contractive(ws.b_n_a, sigma, omega);
  const PeriodicScalar rn_mu = solve_contractive(ws.b_n_mu, sigma, omega);
  const PeriodicScalar rl_eta = solve_small_divisor(ws.eta_l, omega).xi;
  const PeriodicScalar rl_a = solve_small_divisor(ws.b_l_a, omega).xi;
  const PeriodicScalar rl_mu = solve_small_divisor(ws.b_l_mu, omega).xi;

  c.xi_n0 = rn_eta - rn_mu * c.mu0;
  c.xi_n1 = -rn_a - rn_mu * c.mu1;
  PeriodicScalar hat0 = rl_eta - rl_mu * c.mu0;
  PeriodicScalar hat1 = -rl_a - rl_mu * c.mu1;

  // xi^L_0 = -e_p - <L^x hat xi^L + N^x xi^N>, using <L^x> = 1.
  const double const0 = -phase_error - average(fr.L.x * hat0 + fr.normal.x * c.xi_n0);
  const double const1 = -average(fr.L.x * hat1 + fr.normal.x * c.xi_n1);
  c.xi_l0 = hat0 + const0;
  c.xi_l1 = hat1 + const1;

  c.dk0 = {fr.L.x * c.xi_l0 + fr.normal.x * c.xi_n0, fr.L.y * c.xi_l0 + fr.normal.y * c.xi_n0};
  c.dk1 = {fr.L.x * c.xi_l1 + fr.normal.x * c.xi_n1, fr.L.y * c.xi_l1 + fr.normal.y * c.xi_n1};
  return c;
}

struct QpCorrection {
  VecField dK;
  double delta_mu = 0.0;
};

inline QpCorrection newton_step_given_da(const QpProblem& pb, const QpState& s, double delta_a) {
  const auto ev = detail::evaluate_frame(pb, s.K, s.params);
  const VecField E = detail::invariance_error(ev.map, s.K, pb.omega);
  const NewtonWorkspace ws = project_on_frame(ev, E, pb.omega);
  const AffineCorrection c =
      prepare_step(ws, ev.frame, average(s.K.eta_x), pb.omega, pb.sigma(), pb.limits.mu_twist_floor);
  return {c.dk(delta_a), c.dmu(delta_a)};
}

// One Steffensen step for g(x) = 0 from x = 0 with probe h = g(0)
// (magnitude floored at probe_floor).
inline double steffensen_update(const std::function<double(double)>& g, double probe_floor = 1e-8,
                                double denominator_floor = 1e-8) {
  const double g0 = g(0.0);
  if (g0 == 0.0) return 0.0;
  const double h = std::abs(g0) >= probe_floor ? g0 : std::copysign(probe_floor, g0);
  const double gh = g(h);
  const double slope = (gh - g0) / h;
  if (!(std::abs(slope) >= denominator_floor)) {
    throw ANondegeneracy("steffensen: d b_a / d a = " + std::to_string(slope) + " below floor");
  }
  return -g0 / slope;
}

namespace detail {

inline TorusEmbedding add(const TorusEmbedding& K, const VecField& d, double scale = 1.0) {
  return {K.eta_x + d.x * scale, K.ky + d.y * scale};
}

inline VecField filtered(const VecField& d, double keep) {
  if (keep >= 1.0) return d;
  return {low_pass(d.x, keep), low_pass(d.y, keep)};
}

inline double max_tail(const TorusEmbedding& K, double band) {
  return std::max(tail_fraction(K.eta_x, band), tail_fraction(K.ky, band));
}

inline Diagnostics diagnose(const QpProblem& pb, const QpEvaluation& ev, const TorusEmbedding& K,
                            double invariance_sup) {
  Diagnostics d;
  d.invariance_error_sup = invariance_sup;
  d.reducibility_error_sup = reducibility_error(ev.map, ev.frame, RigidRotation{pb.omega}).sup;
  d.min_angle = min_angle(ev.frame.vartheta, ev.frame.gram);
  d.twist_a = ev.twist_a;
  d.twist_mu = ev.twist_mu;
  d.contraction = pb.sigma();
  d.tail = max_tail(K, pb.modes.tail_band);
  d.mode_count = K.size();
  return d;
}

}  // namespace detail

inline QpState newton_solve(const QpProblem& pb, QpState s) {
  pb.validate();
  s.error_history.clear();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    const auto ev = detail::evaluate_frame(pb, s.K, s.params);
    const VecField E = detail::invariance_error(ev.map, s.K, pb.omega);
    const double inv = std::max(sup_norm(E.x), sup_norm(E.y));
    const double ep = average(s.K.eta_x);
    const double eb = ev.twist_a - pb.target_twist;
    const double err = std::max({inv, std::abs(ep), std::abs(eb)});
    s.error_history.push_back(err);
    if (inv <= pb.tol.invariance && std::abs(ep) <= pb.tol.phase && std::abs(eb) <= pb.tol.twist) {
      s.iterations = it;
      s.diag = detail::diagnose(pb, ev, s.K, inv);
      return s;
    }
    if (!std::isfinite(err) || err > 1.0 || (it >= 1 && err > 100.0 * prev)) {
      throw Divergence("newton_solve: iteration diverged", inv, ep, eb);
    }
    // Below 1e-6 a Newton step that fails to halve the error means the grid
    // no longer resolves the circle.
    if (it >= 2 && err < 1e-6 && err > 0.5 * prev) {
      throw Divergence("newton_solve: error stagnated at " + std::to_string(err), inv, ep, eb);
    }
    if (it >= pb.limits.max_iterations) {
      throw Divergence("newton_solve: no convergence within " + std::to_string(it) + " iterations", inv, ep, eb);
    }
    prev = err;

    const NewtonWorkspace ws = project_on_frame(ev, E, pb.omega);
    const AffineCorrection c = prepare_step(ws, ev.frame, ep, pb.omega, pb.sigma(), pb.limits.mu_twist_floor);
    auto g = [&](double da) {
      const ParamPoint q{s.params.a + da, s.params.mu + c.dmu(da), s.params.eps};
      return detail::twist_at(pb, detail::add(s.K, c.dk(da)), q) - pb.target_twist;
    };
    const double da = steffensen_update(g, pb.limits.probe_floor, pb.limits.a_nondegeneracy_floor);
    s.K = detail::add(s.K, detail::filtered(c.dk(da), pb.modes.correction_band));
    s.params.a += da;
    s.params.mu += c.dmu(da);
  }
}

struct EpsDerivative {
  VecField dK;
  double da = 0.0;
  double dmu = 0.0;
};

// d(K, a, mu)/d eps at a converged state: the Newton system with right-hand
// side D_eps F(K), zero phase defect, and the a-direction fixed by requiring
// the twist to stay constant, d b_a / d eps = 0 (central differences).
inline EpsDerivative eps_derivative(const QpProblem& pb, const QpState& s, double fd_step = 1e-5) {
  const auto ev = detail::evaluate_frame(pb, s.K, s.params);
  const std::size_t n = s.size();
  std::vector<double> ex(n), ey(n);
  for (std::size_t j = 0; j < n; ++j) {
    ex[j] = ev.map.jets[j].d_eps.x;
    ey[j] = ev.map.jets[j].d_eps.y;
  }
  const VecField rhs{PeriodicScalar(std::move(ex)), PeriodicScalar(std::move(ey))};
  const NewtonWorkspace ws = project_on_frame(ev, rhs, pb.omega);
  const AffineCorrection c = prepare_step(ws, ev.frame, 0.0, pb.omega, pb.sigma(), pb.limits.mu_twist_floor);

  auto directional = [&](double da) {
    const VecField dk = c.dk(da);
    const double dmu = c.dmu(da);
    auto at = [&](double h) {
      const ParamPoint q{s.params.a + h * da, s.params.mu + h * dmu, s.params.eps + h};
      return detail::twist_at(pb, detail::add(s.K, dk, h), q);
    };
    return (at(fd_step) - at(-fd_step)) / (2.0 * fd_step);
  };
  const double g0 = directional(0.0);
  const double g1 = directional(1.0);
  const double slope = g1 - g0;
  if (!(std::abs(slope) >= pb.limits.a_nondegeneracy_floor)) {
    throw ANondegeneracy("eps_derivative: twist does not depend on a");
  }
  const double da = -g0 / slope;
  return {detail::filtered(c.dk(da), pb.modes.correction_band), da, c.dmu(da)};
}

}  // namespace ntwist
