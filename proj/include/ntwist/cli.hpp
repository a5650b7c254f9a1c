#pragma once

// Command layer behind the ntwist executable: flat key=value run
// configuration, CSV output, and one function per subcommand.  Commands
// return the process exit code (0 success, 2 stopped before the target, 1
// error) and write their tables into the output directory.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ntwist/continuation.hpp"
#include "ntwist/error.hpp"
#include "ntwist/fourier.hpp"
#include "ntwist/frame.hpp"
#include "ntwist/maps.hpp"
#include "ntwist/solver_general.hpp"
#include "ntwist/solver_qp.hpp"

namespace ntwist::cli {

inline constexpr const char* kOutDirEnv = "NTWIST_OUT_DIR";

struct RunConfig {
  std::string family = "dsntm";
  Forcing::Variant forcing = Forcing::Variant::symmetric;
  double sigma = 0.8;
  double omega = kGoldenMean;
  double twist = 0.0;  // b_a^0
  double eps_target = 0.0;
  std::vector<double> twists;  // twist-surface grid

  QpTolerances tol;
  ModePolicy modes;
  NewtonLimits limits;
  StepPolicy steps;

  // rotnum-sweep
  SweepParameter sweep = SweepParameter::a;
  double sweep_eps = 2.2;
  double sweep_lo = -0.1;
  double sweep_hi = 0.1;
  double sweep_step = 0.01;
  double edge_resolution = 1e-4;
  // Order 4 on finer grids stalls above 1e-10 near the 5/8 plateau.
  std::size_t general_n = 1024;
  int interp_order = 8;
  double general_tol = 1e-10;
  double rho_tol = 1e-10;

  std::size_t fit_points = 20;
  std::string out_dir = "out";
  unsigned seed = 12345;
  unsigned threads = 1;
  bool timing = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  if (key == "omega" && v == "golden") return kGoldenMean;
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d)) {
    throw ConfigError("config: '" + key + "' expects a finite number, got '" + v + "'");
  }
  return d;
}

inline long parse_long(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long d = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return d;
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  const long d = parse_long(key, v);
  if (d <= 0) throw ConfigError("config: '" + key + "' must be positive");
  return static_cast<std::size_t>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config: '" + key + "' is an empty list");
  return out;
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  if (c.family != "dsntm") throw ConfigError("config: unknown family '" + c.family + "'");
  if (!(c.sigma > 0.0 && c.sigma < 1.0)) {
    throw ConfigError("config: sigma must lie in (0,1) for a dissipative map, got " + std::to_string(c.sigma));
  }
  if (!(c.omega > 0.0 && c.omega < 1.0)) throw ConfigError("config: omega must lie in (0,1)");
  if (!(c.eps_target >= 0.0)) throw ConfigError("config: eps_target must be non-negative");
  if (!(c.tol.invariance > 0.0)) throw ConfigError("config: tol must be positive");
  if (!is_power_of_two(c.modes.n_min) || !is_power_of_two(c.modes.n_max) || c.modes.n_min < 8 ||
      c.modes.n_min > c.modes.n_max) {
    throw ConfigError("config: n_min and n_max must be powers of two with 8 <= n_min <= n_max");
  }
  if (!(c.steps.min > 0.0 && c.steps.min <= c.steps.initial && c.steps.initial <= c.steps.max)) {
    throw ConfigError("config: step sizes must satisfy 0 < step_min <= step_initial <= step_max");
  }
  if (!is_power_of_two(c.general_n)) throw ConfigError("config: general_n must be a power of two");
  try {
    check_interpolation_order(c.interp_order, c.general_n);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(c.sweep_lo <= c.sweep_hi) || !(c.sweep_step > 0.0)) throw ConfigError("config: bad sweep range");
  if (c.threads < 1) throw ConfigError("config: threads must be at least 1");
  if (c.fit_points < 5) throw ConfigError("config: fit_points must be at least 5");
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::map<std::string, bool> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string v = detail::trim(line.substr(eq + 1));
    if (seen[key]) throw ConfigError("config: duplicate key '" + key + "'");
    seen[key] = true;
    using detail::parse_double;
    if (key == "family") {
      c.family = v;
    } else if (key == "forcing") {
      if (v == "symmetric") {
        c.forcing = Forcing::Variant::symmetric;
      } else if (v == "nonsymmetric") {
        c.forcing = Forcing::Variant::nonsymmetric;
      } else {
        throw ConfigError("config: forcing must be symmetric or nonsymmetric, got '" + v + "'");
      }
    } else if (key == "sigma") {
      c.sigma = parse_double(key, v);
    } else if (key == "omega") {
      c.omega = parse_double(key, v);
    } else if (key == "twist") {
      c.twist = parse_double(key, v);
    } else if (key == "twists") {
      c.twists = detail::parse_list(key, v);
    } else if (key == "eps_target") {
      c.eps_target = parse_double(key, v);
    } else if (key == "tol") {
      const double t = parse_double(key, v);
      c.tol = {t, t, t};
    } else if (key == "max_iterations") {
      c.limits.max_iterations = static_cast<int>(detail::parse_long(key, v));
    } else if (key == "n_min") {
      c.modes.n_min = detail::parse_size(key, v);
    } else if (key == "n_max") {
      c.modes.n_max = detail::parse_size(key, v);
    } else if (key == "step_initial") {
      c.steps.initial = parse_double(key, v);
    } else if (key == "step_min") {
      c.steps.min = parse_double(key, v);
    } else if (key == "step_max") {
      c.steps.max = parse_double(key, v);
    } else if (key == "alpha_floor") {
      c.steps.alpha_floor = parse_double(key, v);
    } else if (key == "sweep") {
      if (v == "a") {
        c.sweep = SweepParameter::a;
      } else if (v == "mu") {
        c.sweep = SweepParameter::mu;
      } else {
        throw ConfigError("config: sweep must be a or mu, got '" + v + "'");
      }
    } else if (key == "sweep_eps") {
      c.sweep_eps = parse_double(key, v);
    } else if (key == "sweep_lo") {
      c.sweep_lo = parse_double(key, v);
    } else if (key == "sweep_hi") {
      c.sweep_hi = parse_double(key, v);
    } else if (key == "sweep_step") {
      c.sweep_step = parse_double(key, v);
    } else if (key == "edge_resolution") {
      c.edge_resolution = parse_double(key, v);
    } else if (key == "general_n") {
      c.general_n = detail::parse_size(key, v);
    } else if (key == "interp_order") {
      c.interp_order = static_cast<int>(detail::parse_long(key, v));
    } else if (key == "general_tol") {
      c.general_tol = parse_double(key, v);
    } else if (key == "rho_tol") {
      c.rho_tol = parse_double(key, v);
    } else if (key == "fit_points") {
      c.fit_points = detail::parse_size(key, v);
    } else if (key == "out_dir") {
      c.out_dir = v;
    } else if (key == "seed") {
      c.seed = static_cast<unsigned>(detail::parse_long(key, v));
    } else if (key == "threads") {
      c.threads = static_cast<unsigned>(detail::parse_size(key, v));
    } else if (key == "timing") {
      c.timing = detail::parse_bool(key, v);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config(in);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Minimal CSV writer: header row, then rows of preformatted cells.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::vector<std::vector<double>> read_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  if (std::getline(in, line) && header) {
    header->clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header->push_back(cell);
  }
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::shared_ptr<const MapFamily> make_family(const RunConfig& c) {
  if (c.family != "dsntm") throw ConfigError("config: unknown family '" + c.family + "'");
  return std::make_shared<DissipativeStandardNontwist>(c.sigma, Forcing(c.forcing));
}

inline QpProblem make_problem(const RunConfig& c) {
  QpProblem pb;
  pb.family = make_family(c);
  pb.omega = c.omega;
  pb.target_twist = c.twist;
  pb.tol = c.tol;
  pb.modes = c.modes;
  pb.limits = c.limits;
  return pb;
}

// --out beats the environment, which beats the config file.
inline std::filesystem::path resolve_out_dir(const RunConfig& c, const std::string& cli_out = {}) {
  std::filesystem::path dir = c.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
  if (!cli_out.empty()) dir = cli_out;
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_path(const std::filesystem::path& file, const std::vector<ContinuationRecord>& recs,
                       bool timing) {
  CsvWriter w(file, {"eps", "a", "mu", "N", "err", "alpha", "b_a", "b_mu", "iters", "wall_ms"});
  for (const auto& r : recs) {
    w.row({format_double(r.eps), format_double(r.a), format_double(r.mu), std::to_string(r.n),
           format_double(r.invariance_error), format_double(r.alpha), format_double(r.b_a), format_double(r.b_mu),
           std::to_string(r.iterations), format_double(timing ? r.wall_ms : 0.0)});
  }
}

inline void write_circle(const std::filesystem::path& file, const QpProblem& pb, const QpState& s) {
  const auto ev = ntwist::detail::evaluate_frame(pb, s.K, s.params);
  CsvWriter w(file, {"theta", "Kx", "Ky", "Nx", "Ny"});
  for (std::size_t j = 0; j < s.size(); ++j) {
    const Point k = s.K.at(j);
    w.row({format_double(s.K.eta_x.node(j)), format_double(k.x), format_double(k.y),
           format_double(ev.frame.normal.x[j]), format_double(ev.frame.normal.y[j])});
  }
}

inline int exit_code(Termination t) { return t == Termination::reached_target ? 0 : 2; }

inline int cmd_continue(const RunConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const QpProblem pb = make_problem(c);
  auto res = continue_in_eps(pb, integrable_state(pb, pb.modes.n_min), c.eps_target, c.steps);
  write_path(out / "path.csv", res.records, c.timing);
  write_circle(out / "final_circle.csv", pb, res.final_state);
  const auto& last = res.records.back();
  log << "continue: " << to_string(res.reason) << " at eps=" << format_double(last.eps)
      << " a=" << format_double(last.a) << " mu=" << format_double(last.mu) << " N=" << last.n << '\n';
  if (!res.message.empty()) log << "  " << res.message << '\n';
  return exit_code(res.reason);
}

inline void write_fit(const std::filesystem::path& file, const BreakdownFit& fit) {
  std::ofstream f(file);
  if (!f) throw Error("cannot write " + file.string());
  f << "eps_c = " << format_double(fit.eps_c) << '\n'
    << "slope = " << format_double(fit.slope) << '\n'
    << "residual = " << format_double(fit.residual) << '\n';
}

inline int cmd_breakdown(const RunConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const QpProblem pb = make_problem(c);
  auto res = continue_in_eps(pb, integrable_state(pb, pb.modes.n_min), c.eps_target, c.steps);
  write_path(out / "path.csv", res.records, c.timing);
  {
    CsvWriter w(out / "alpha.csv", {"eps", "alpha"});
    for (const auto& r : res.records) w.row({format_double(r.eps), format_double(r.alpha)});
  }
  const BreakdownFit fit = breakdown_extrapolate(res.records, c.fit_points);
  write_fit(out / "fit.txt", fit);
  log << "breakdown: path stopped by " << to_string(res.reason) << " at eps=" << format_double(res.records.back().eps)
      << ", N=" << res.records.back().n << "; eps_c = " << format_double(fit.eps_c) << " from " << fit.points
      << " points" << (fit.monotone ? "" : " (alpha not monotone in fit window)") << '\n';
  return 0;
}

// The non-twist circle at sweep_eps from the quasi-periodic solver, moved to a
// grid of general_n nodes (or more if the circle needs it).
inline GeneralState sweep_start(const RunConfig& c, const QpProblem& pb, std::ostream& log) {
  auto res = continue_in_eps(pb, integrable_state(pb, pb.modes.n_min), c.sweep_eps, c.steps);
  if (res.reason != Termination::reached_target) {
    throw Error("rotnum-sweep: continuation stopped before eps=" + format_double(c.sweep_eps) + ": " + res.message);
  }
  const QpState& s = res.final_state;
  log << "rotnum-sweep: start circle at eps=" << format_double(s.params.eps) << " a=" << format_double(s.params.a)
      << " mu=" << format_double(s.params.mu) << " N=" << s.size() << '\n';
  const std::size_t n = std::max(c.general_n, 4 * s.size());
  return general_from_rotation(s.K, s.params, pb.omega, n, c.interp_order);
}

inline SweepSettings sweep_settings(const RunConfig& c, const GeneralState& start) {
  SweepSettings set;
  const double center = c.sweep == SweepParameter::a ? start.params.a : start.params.mu;
  set.lo = center + c.sweep_lo;
  set.hi = center + c.sweep_hi;
  set.step = c.sweep_step;
  set.edge_resolution = c.edge_resolution;
  set.rho_tol = c.rho_tol;
  set.newton.tol = c.general_tol;
  return set;
}

inline int cmd_rotnum_sweep(const RunConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const QpProblem pb = make_problem(c);
  const GeneralState start = sweep_start(c, pb, log);
  const SweepResult r = sweep_parameter(*pb.family, start, c.sweep, sweep_settings(c, start));
  CsvWriter w(out / "rho_vs_param.csv", {"param", "rho", "err", "locked_flag"});
  std::size_t locked = 0;
  for (const auto& row : r.rows) {
    w.row({format_double(row.param), format_double(row.rho), format_double(row.invariance_error),
           row.lock.locked ? "1" : "0"});
    locked += row.lock.locked ? 1 : 0;
  }
  log << "rotnum-sweep: " << r.rows.size() << " rows, " << locked << " locked\n";
  if (!r.stop_low.empty()) log << "  lower sweep stopped: " << r.stop_low << '\n';
  if (!r.stop_high.empty()) log << "  upper sweep stopped: " << r.stop_high << '\n';
  return r.stop_low.empty() && r.stop_high.empty() ? 0 : 2;
}

inline int cmd_twist_surface(const RunConfig& c, const std::filesystem::path& out, std::ostream& log) {
  const QpProblem pb = make_problem(c);
  const std::vector<double> twists = c.twists.empty() ? std::vector<double>{c.twist} : c.twists;
  const auto paths = twist_surface(pb, twists, c.eps_target, c.steps, c.threads);
  CsvWriter w(out / "surface.csv", {"b_a0", "eps", "a", "mu"});
  bool complete = true;
  for (const auto& p : paths) {
    for (const auto& r : p.records) {
      w.row({format_double(p.target_twist), format_double(r.eps), format_double(r.a), format_double(r.mu)});
    }
    if (!p.error.empty()) {
      log << "twist-surface: b_a0=" << format_double(p.target_twist) << " failed: " << p.error << '\n';
      complete = false;
    } else if (p.reason != Termination::reached_target) {
      log << "twist-surface: b_a0=" << format_double(p.target_twist) << " stopped by " << to_string(p.reason)
          << '\n';
      complete = false;
    }
  }
  return complete ? 0 : 2;
}

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Fitted exponent q of e_{n+1} ~ C e_n^q over the steps with e_n <= start.
inline std::pair<double, int> convergence_order(const std::vector<double>& e, double start = 1e-4) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    if (e[i] <= start && e[i] > 0.0 && e[i + 1] > 1e-14) {
      xs.push_back(std::log(e[i]));
      ys.push_back(std::log(e[i + 1]));
    }
  }
  if (xs.empty()) return {0.0, 0};
  if (xs.size() == 1) return {ys[0] / xs[0], 1};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return {sxy / sxx, static_cast<int>(xs.size())};
}

inline std::vector<VerifyCheck> run_verify(const RunConfig& c) {
  std::vector<VerifyCheck> checks;
  auto add = [&](std::string name, bool pass, std::string detail) {
    checks.push_back({std::move(name), pass, std::move(detail)});
  };
  const QpProblem pb = make_problem(c);
  const auto& family = *pb.family;

  {
    const QpState s = newton_solve(pb, integrable_state(pb, pb.modes.n_min));
    const double a = 0.5 * c.twist;
    const double dev = std::max({std::abs(s.params.a - a), std::abs(s.params.mu - (c.omega - a * a)),
                                 std::abs(s.diag.twist_mu - 1.0), std::abs(s.diag.twist_a - c.twist),
                                 sup_norm(s.K.eta_x), sup_norm(s.K.ky)});
    add("integrable closed form", dev <= 1e-10, "max deviation " + format_double(dev));
  }
  {
    const auto rep = check_symmetry(Forcing(c.forcing), {0.03, 0.6, 1.5}, 1000, c.sigma, c.seed);
    if (c.forcing == Forcing::Variant::symmetric) {
      add("map symmetry", rep.max_deviation <= 1e-13, "max deviation " + format_double(rep.max_deviation));
    } else {
      add("map asymmetry", rep.max_deviation > 1e-6, "max deviation " + format_double(rep.max_deviation));
    }
  }
  {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Point z{0.5 * (u(rng) + 1.0), u(rng)};
      const ParamPoint p{0.1 * u(rng), 0.6, 2.0 * (u(rng) + 1.0)};
      const Mat2 J = family.jacobian(z, p);
      const double h = 1e-6;
      const MapImage xp = family.eval({z.x + h, z.y}, p), xm = family.eval({z.x - h, z.y}, p);
      const MapImage yp = family.eval({z.x, z.y + h}, p), ym = family.eval({z.x, z.y - h}, p);
      worst = std::max({worst, std::abs((xp.x_lift - xm.x_lift) / (2 * h) - J.xx),
                        std::abs((xp.y - xm.y) / (2 * h) - J.yx), std::abs((yp.x_lift - ym.x_lift) / (2 * h) - J.xy),
                        std::abs((yp.y - ym.y) / (2 * h) - J.yy), std::abs(J.det() - c.sigma)});
    }
    add("jacobian vs finite differences", worst <= 1e-6, "max deviation " + format_double(worst));
  }
  {
    std::mt19937_64 rng(c.seed + 1);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t n = 256;
    std::vector<double> v(n, 0.0);
    for (int k = 1; k <= 20; ++k) {
      const double ck = g(rng) * std::exp(-0.5 * k), sk = g(rng) * std::exp(-0.5 * k);
      for (std::size_t j = 0; j < n; ++j) {
        const double t = kTwoPi * k * static_cast<double>(j) / static_cast<double>(n);
        v[j] += ck * std::cos(t) + sk * std::sin(t);
      }
    }
    const PeriodicScalar eta(std::move(v));
    const PeriodicScalar xs = solve_contractive(eta, c.sigma, c.omega);
    const PeriodicScalar rs = xs * c.sigma - shift(xs, c.omega) - eta;
    const auto sd = solve_small_divisor(eta, c.omega);
    const PeriodicScalar rd = sd.xi - shift(sd.xi, c.omega) - (eta - sd.average);
    const double rel = std::max(sup_norm(rs), sup_norm(rd)) / sup_norm(eta);
    add("cohomological residuals", rel <= 1e-10, "relative residual " + format_double(rel));
  }
  {
    QpProblem small = pb;
    small.tol = c.tol;
    const double eps = std::min(0.5, c.eps_target > 0 ? c.eps_target : 0.5);
    std::string detail;
    bool ok = false;
    try {
      auto res = continue_in_eps(small, integrable_state(small, small.modes.n_min), eps, c.steps);
      const QpState& s = res.final_state;
      const auto ev = ntwist::detail::evaluate_frame(small, s.K, s.params);
      double det = 0.0, pair = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        det = std::max(det, std::abs(ev.frame.det_p(j) - 1.0));
        pair = std::max(pair, std::abs(omega_form(ev.frame.normal.at(j), ev.frame.L.at(j)) - 1.0));
      }
      const auto r = residuals(small, s);
      ok = det <= 1e-10 && pair <= 1e-10 && std::abs(r.phase) <= c.tol.phase && std::abs(r.twist) <= c.tol.twist;
      detail = "eps=" + format_double(eps) + " |det P - 1|=" + format_double(det) + " phase=" +
               format_double(r.phase) + " twist=" + format_double(r.twist);
    } catch (const Error& e) {
      detail = e.what();
    }
    add("frame identities and residuals", ok, detail);
  }
  {
    // Perturb the eps = 0.5 circle and watch the error sequence.
    QpProblem q = pb;
    std::string detail;
    bool ok = false;
    try {
      auto res = continue_in_eps(q, integrable_state(q, q.modes.n_min), 0.5, c.steps);
      QpState s = res.final_state;
      s.K.ky += PeriodicScalar::sample(s.size(), [](double t) { return 1e-3 * std::sin(kTwoPi * t); });
      s.params.mu += 1e-4;
      s = newton_solve(q, std::move(s));
      const auto [order, points] = convergence_order(s.error_history);
      if (points == 0) {
        ok = true;
        detail = "reduced confidence: tolerance reached before the quadratic regime";
      } else {
        ok = order >= 1.7;
        detail = "fitted order " + format_double(order) + " over " + std::to_string(points) + " steps" +
                 (points < 2 ? " (reduced confidence)" : "");
      }
    } catch (const Error& e) {
      detail = e.what();
    }
    add("quadratic convergence", ok, detail);
  }
  return checks;
}

inline int cmd_verify(const RunConfig& c, std::ostream& log) {
  const auto checks = run_verify(c);
  bool all = true;
  for (const auto& ch : checks) {
    log << (ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << '\n';
    all = all && ch.pass;
  }
  return all ? 0 : 1;
}

}  // namespace ntwist::cli
