#pragma once

// Continuation in eps of circles with fixed rotation number and fixed a-twist:
// first-order tangent predictor, Newton corrector, dyadic mode adaptivity, and
// extrapolation of the breakdown value from the minimum bundle angle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ntwist/error.hpp"
#include "ntwist/solver_qp.hpp"

namespace ntwist {

struct StepPolicy {
  double initial = 0.05;
  double min = 1e-6;
  double max = 0.1;
  int easy_iterations = 5;  // an accept is "easy" at or below this many iterations
  int easy_accepts_to_grow = 3;
  double alpha_floor = 1e-4;
};

struct ContinuationRecord {
  double eps = 0.0;
  double a = 0.0;
  double mu = 0.0;
  std::size_t n = 0;
  double invariance_error = 0.0;
  double alpha = 0.0;
  double b_a = 0.0;
  double b_mu = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

enum class Termination { reached_target, hyperbolicity_loss, mode_limit, step_underflow };

inline const char* to_string(Termination t) noexcept {
  switch (t) {
    case Termination::reached_target: return "reached_target";
    case Termination::hyperbolicity_loss: return "hyperbolicity_loss";
    case Termination::mode_limit: return "mode_limit";
    case Termination::step_underflow: return "step_underflow";
  }
  return "unknown";
}

struct ContinuationResult {
  std::vector<ContinuationRecord> records;
  QpState final_state;
  Termination reason = Termination::reached_target;
  std::string message;
};

class ModeLimitReached : public Error {
 public:
  using Error::Error;
};

inline ContinuationRecord make_record(const QpState& s, double wall_ms) {
  return {s.params.eps, s.params.a,         s.params.mu,          s.size(),     s.diag.invariance_error_sup,
          s.diag.min_angle, s.diag.twist_a, s.diag.twist_mu, s.iterations, wall_ms};
}

// Newton at fixed eps, doubling the grid until the tail criterion holds.  A
// run that stalls close to the tolerance is resolution limited and is retried
// on the doubled grid as well.
inline QpState solve_adaptive(const QpProblem& pb, QpState s) {
  auto doubled = [&](const QpState& from) {
    const std::size_t n2 = 2 * from.size();
    if (n2 > pb.modes.n_max) {
      throw ModeLimitReached("mode limit " + std::to_string(pb.modes.n_max) + " reached at eps=" +
                             std::to_string(from.params.eps));
    }
    QpState t = from;
    t.K = from.K.resampled(n2);
    return t;
  };
  int total = 0;
  for (;;) {
    QpState next;
    try {
      next = newton_solve(pb, s);
    } catch (const Divergence& e) {
      if (!(e.invariance() <= 1e3 * pb.tol.invariance)) throw;
      s = doubled(s);
      continue;
    }
    total += next.iterations;
    if (next.diag.tail <= pb.modes.tail_double) {
      next.iterations = total;
      return next;
    }
    s = doubled(next);
  }
}

// Halve the grid when the upper quarter is at round-off and the coarser
// representation still passes the doubling test with margin.
inline void maybe_shrink(const QpProblem& pb, QpState& s) {
  const std::size_t half = s.size() / 2;
  if (half < pb.modes.n_min || s.diag.tail >= pb.modes.tail_halve) return;
  TorusEmbedding coarse = s.K.resampled(half);
  if (detail::max_tail(coarse, pb.modes.tail_band) < 1e-3 * pb.modes.tail_double) s.K = std::move(coarse);
}

inline ContinuationResult continue_in_eps(const QpProblem& pb, const QpState& start, double eps_target,
                                          const StepPolicy& policy = {}) {
  using clock = std::chrono::steady_clock;
  auto elapsed_ms = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  ContinuationResult out;
  auto t0 = clock::now();
  QpState state = solve_adaptive(pb, start);
  out.records.push_back(make_record(state, elapsed_ms(t0)));

  double h = policy.initial;
  int easy = 0;
  out.reason = Termination::reached_target;
  while (state.params.eps != eps_target) {
    const double dir = eps_target > state.params.eps ? 1.0 : -1.0;
    const double remaining = std::abs(eps_target - state.params.eps);
    const bool last = h >= remaining;
    const double step = last ? remaining : h;
    t0 = clock::now();

    QpState trial;
    try {
      const EpsDerivative d = eps_derivative(pb, state);
      trial.K = detail::add(state.K, d.dK, dir * step);
      trial.params = {state.params.a + dir * step * d.da, state.params.mu + dir * step * d.dmu,
                      last ? eps_target : state.params.eps + dir * step};
      trial = solve_adaptive(pb, std::move(trial));
    } catch (const ModeLimitReached& e) {
      out.reason = Termination::mode_limit;
      out.message = e.what();
      break;
    } catch (const Error& e) {
      h *= 0.5;
      easy = 0;
      if (h < policy.min) {
        out.reason = Termination::step_underflow;
        out.message = e.what();
        break;
      }
      continue;
    }

    state = std::move(trial);
    out.records.push_back(make_record(state, elapsed_ms(t0)));
    if (state.diag.min_angle < policy.alpha_floor) {
      out.reason = Termination::hyperbolicity_loss;
      break;
    }
    easy = state.iterations <= policy.easy_iterations ? easy + 1 : 0;
    if (easy >= policy.easy_accepts_to_grow) {
      h = std::min(2.0 * h, policy.max);
      easy = 0;
    }
    maybe_shrink(pb, state);
  }
  out.final_state = std::move(state);
  return out;
}

struct BreakdownFit {
  double eps_c = 0.0;
  double slope = 0.0;     // alpha = slope (eps - eps_c)
  double residual = 0.0;  // rms of the fit
  std::size_t points = 0;
  bool monotone = true;   // false flags an unreliable fit
};

// Least-squares line through the trailing (eps, alpha) points: the last
// decade of alpha, capped at 20 points.
inline BreakdownFit breakdown_extrapolate(const std::vector<ContinuationRecord>& records,
                                          std::size_t max_points = 20, std::size_t min_points = 5) {
  if (records.size() < min_points) throw DomainError("breakdown_extrapolate: not enough records");
  const double last_alpha = records.back().alpha;
  std::size_t count = 0;
  for (auto it = records.rbegin(); it != records.rend() && count < max_points; ++it, ++count) {
    if (it->alpha > 10.0 * last_alpha) break;
  }
  if (count < min_points) count = std::min(records.size(), std::max(min_points, count));
  if (count < min_points) throw DomainError("breakdown_extrapolate: not enough records in the fit window");
  const std::size_t first = records.size() - count;

  double se = 0.0, sa = 0.0;
  for (std::size_t i = first; i < records.size(); ++i) {
    se += records[i].eps;
    sa += records[i].alpha;
  }
  const double m = static_cast<double>(count);
  const double me = se / m, ma = sa / m;
  double see = 0.0, sea = 0.0;
  for (std::size_t i = first; i < records.size(); ++i) {
    const double de = records[i].eps - me;
    see += de * de;
    sea += de * (records[i].alpha - ma);
  }
  if (see == 0.0) throw DomainError("breakdown_extrapolate: degenerate eps values");
  BreakdownFit fit;
  fit.slope = sea / see;
  const double intercept = ma - fit.slope * me;
  if (fit.slope == 0.0) throw DomainError("breakdown_extrapolate: flat alpha");
  fit.eps_c = -intercept / fit.slope;
  double rss = 0.0;
  for (std::size_t i = first; i < records.size(); ++i) {
    const double r = records[i].alpha - (intercept + fit.slope * records[i].eps);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / m);
  fit.points = count;
  const double sign = records.back().alpha - records[first].alpha;
  for (std::size_t i = first + 1; i < records.size(); ++i) {
    const double d = records[i].alpha - records[i - 1].alpha;
    if (d * sign < 0.0) fit.monotone = false;
  }
  return fit;
}

struct SurfacePath {
  double target_twist = 0.0;
  std::vector<ContinuationRecord> records;
  Termination reason = Termination::reached_target;
  std::string error;  // non-empty when the path failed outright
};

// One continuation path per a-twist value, each from the eps = 0 circle.
inline std::vector<SurfacePath> twist_surface(const QpProblem& pb, const std::vector<double>& twists,
                                              double eps_target, const StepPolicy& policy = {},
                                              unsigned threads = 1) {
  std::vector<SurfacePath> paths(twists.size());
  auto run = [&](std::size_t i) {
    QpProblem local = pb;
    local.target_twist = twists[i];
    paths[i].target_twist = twists[i];
    try {
      auto res = continue_in_eps(local, integrable_state(local, local.modes.n_min), eps_target, policy);
      paths[i].records = std::move(res.records);
      paths[i].reason = res.reason;
    } catch (const Error& e) {
      paths[i].error = e.what();
    }
  };
  if (threads <= 1 || twists.size() <= 1) {
    for (std::size_t i = 0; i < twists.size(); ++i) run(i);
    return paths;
  }
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(threads, twists.size());
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < twists.size(); i += workers) run(i);
    });
  }
  for (auto& t : pool) t.join();
  return paths;
}

}  // namespace ntwist
