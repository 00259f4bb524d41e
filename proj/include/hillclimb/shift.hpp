#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hillclimb/ball_search.hpp"
#include "hillclimb/density.hpp"
#include "hillclimb/kde.hpp"
#include "hillclimb/log.hpp"
#include "hillclimb/trajectory.hpp"

namespace hillclimb {

struct StopRule {
  double f_improve_tol = 1e-14;      // argmax-style algorithms stop when the gain drops below this
  double displacement_rel = 1e-10;   // Euler family / mean shift: stop when |step| < displacement_rel * step
  double grad_tol = 1e-8;            // gradient norm treated as zero
  long max_iters = 100000;
};

/// Parameters of the continuous-space algorithms. `step` is epsilon for the
/// ball methods and rho for the Euler family and line search.
struct ShiftConfig {
  double step = 0.05;
  double slope_fraction = 0.5;
  bool unregularized = false;             // Max Slope Shift with c = 0; testing only
  std::function<double(double)> phi;      // Euler variant step modulation; empty means 1
  double grad_guard = 0.0;                // level shift: stop once |grad f| <= grad_guard
  StopRule stop;
  InnerSolverConfig inner;

  /// Tolerances scaled by the model's smoothness bounds.
  static ShiftConfig for_model(const SmoothnessBounds& b, double step) {
    ShiftConfig c;
    c.step = step;
    c.stop.f_improve_tol = 1e-14 * b.kappa0;
    c.stop.grad_tol = 1e-8 * b.kappa1;
    return c;
  }

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw InputError("ShiftConfig: step must be positive");
    if (!unregularized && !(slope_fraction > 0.0 && slope_fraction < 1.0)) {
      throw InputError("ShiftConfig: slope_fraction must lie in (0, 1)");
    }
    if (stop.max_iters < 1) throw InputError("ShiftConfig: max_iters must be at least 1");
    if (!(stop.f_improve_tol >= 0.0) || !(stop.grad_tol >= 0.0) || !(stop.displacement_rel >= 0.0)) {
      throw InputError("ShiftConfig: stop tolerances must be nonnegative");
    }
  }
};

namespace detail {

inline void check_finite(const Point& x, double f, const char* what) {
  if (!x.allFinite() || !std::isfinite(f)) throw IntegrationError(std::string(what) + ": non-finite value");
}

/// x_{k+1} = x_k + rho * phi(f(x_k)) * grad f(x_k), phi = 1 when unset.
template <Density D>
Trajectory euler_impl(const D& model, const Point& x0, const ShiftConfig& cfg, const char* what) {
  cfg.validate();
  require_dim(x0, model.dim(), what);
  Trajectory t;
  Point x = x0;
  double f = model.value(x);
  check_finite(x, f, what);
  t.start(x, f);
  const double min_disp = cfg.stop.displacement_rel * cfg.step;
  for (long it = 0; it < cfg.stop.max_iters; ++it) {
    const Point g = model.gradient(x);
    double rate = cfg.step;
    if (cfg.phi) {
      const double p = cfg.phi(f);
      if (!std::isfinite(p) || !(p > 0.0)) {
        throw IntegrationError(std::string(what) + ": step modulation undefined at f = " + format_double(f));
      }
      rate = cfg.step * p;
    }
    const Point step = rate * g;
    if (!(step.norm() >= min_disp)) {
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    x = x + step;
    f = model.value(x);
    check_finite(x, f, what);
    t.push(x, f, cosine_between(step, g));
  }
  t.terminal = {TerminalKind::max_iterations, -1};
  return t;
}

/// Whether a first-order ascent move within radius r should gain more than
/// floating-point noise in f. Used to tell solver failure from convergence.
template <Density D>
bool gain_resolvable(const D& model, const Point& x, double f, const Point& g, double r) {
  const double gn = g.norm();
  const double curv = spectral_norm_sym(model.hessian(x));
  const double reach = curv > 0.0 ? std::min(r, gn / curv) : r;
  return 0.5 * gn * reach > 1e3 * std::numeric_limits<double>::epsilon() * std::abs(f);
}

}  // namespace detail

/// Gradient ascent with fixed step rho.
template <Density D>
Trajectory euler_shift(const D& model, const Point& x0, const ShiftConfig& cfg) {
  ShiftConfig c = cfg;
  c.phi = nullptr;
  return detail::euler_impl(model, x0, c, "euler_shift");
}

/// Gradient ascent with step rho * phi(f(x_k)); phi(a) = 1/a gives the
/// log-density flow.
template <Density D>
Trajectory euler_shift_variant(const D& model, const Point& x0, const ShiftConfig& cfg) {
  return detail::euler_impl(model, x0, cfg, "euler_shift_variant");
}

/// x_{k+1} = x_k + rho grad f / |grad f|^2 while |grad f(x_k)| > grad_guard.
/// Stops with terminal `stalled` when the guard trips.
template <Density D>
Trajectory level_shift(const D& model, const Point& x0, const ShiftConfig& cfg) {
  cfg.validate();
  require_dim(x0, model.dim(), "level_shift");
  if (!(cfg.grad_guard > 0.0)) throw InputError("level_shift: grad_guard must be positive");
  Trajectory t;
  Point x = x0;
  double f = model.value(x);
  detail::check_finite(x, f, "level_shift");
  t.start(x, f);
  for (long it = 0; it < cfg.stop.max_iters; ++it) {
    const Point g = model.gradient(x);
    const double g2 = g.squaredNorm();
    if (!(std::sqrt(g2) > cfg.grad_guard)) {
      t.terminal = {TerminalKind::stalled, -1};
      return t;
    }
    const Point step = (cfg.step / g2) * g;
    x = x + step;
    f = model.value(x);
    detail::check_finite(x, f, "level_shift");
    t.push(x, f, cosine_between(step, g));
  }
  t.terminal = {TerminalKind::max_iterations, -1};
  return t;
}

/// Maximizer r* of r -> f(x + r g) over [0, rho]: 9-point grid, then golden
/// section around the best grid node. Returns 0 when nothing beats f(x).
template <Density D>
double line_search_step(const D& model, const Point& x, double fx, const Point& g, double rho,
                        const InnerSolverConfig& inner = {}) {
  auto phi = [&](double r) { return model.value(x + r * g); };
  constexpr int n = 8;
  double vals[n + 1];
  vals[0] = fx;
  int best = 0;
  for (int i = 1; i <= n; ++i) {
    vals[i] = phi(rho * i / n);
    if (vals[i] > vals[best]) best = i;
  }
  if (best == n && model.gradient(x + rho * g).dot(g) >= 0.0) return rho;
  const double lo = rho * std::max(best - 1, 0) / n;
  const double hi = rho * std::min(best + 1, n) / n;
  const double r = golden_section_max(phi, lo, hi, inner.line_tol_rel * rho);
  const double fr = phi(r);
  if (fr > vals[best]) return r;
  return rho * best / n;
}

/// x_{k+1} = x_k + r* grad f(x_k) with r* from `line_search_step`.
template <Density D>
Trajectory line_search_shift(const D& model, const Point& x0, const ShiftConfig& cfg) {
  cfg.validate();
  require_dim(x0, model.dim(), "line_search_shift");
  Trajectory t;
  Point x = x0;
  double f = model.value(x);
  detail::check_finite(x, f, "line_search_shift");
  t.start(x, f);
  for (long it = 0; it < cfg.stop.max_iters; ++it) {
    const Point g = model.gradient(x);
    if (!(g.norm() > 0.0)) {
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    const double r = line_search_step(model, x, f, g, cfg.step, cfg.inner);
    const Point y = x + r * g;
    const double fy = model.value(y);
    detail::check_finite(y, fy, "line_search_shift");
    if (!(fy - f >= cfg.stop.f_improve_tol) || !(fy > f)) {
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    t.push(y, fy, cosine_between(y - x, g));
    x = y;
    f = fy;
  }
  t.terminal = {TerminalKind::max_iterations, -1};
  return t;
}

/// x_{k+1} = argmax of f over the closed ball of radius epsilon around x_k;
/// stops when the gain falls below f_improve_tol.
template <Density D>
Trajectory max_shift(const D& model, const Point& x0, const ShiftConfig& cfg) {
  cfg.validate();
  require_dim(x0, model.dim(), "max_shift");
  const auto dirs = probe_directions(model.dim());
  Trajectory t;
  Point x = x0;
  double f = model.value(x);
  detail::check_finite(x, f, "max_shift");
  t.start(x, f);
  for (long it = 0; it < cfg.stop.max_iters; ++it) {
    const Point g = model.gradient(x);
    const BallMax b = maximize_in_ball(model, x, cfg.step, f, g, dirs, cfg.inner);
    if (!(b.f > f)) {
      if (g.norm() > cfg.stop.grad_tol && detail::gain_resolvable(model, x, f, g, cfg.step)) {
        throw SolverError("max_shift: no improving point in the ball although |grad f| = " + format_double(g.norm()));
      }
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    if (b.f - f < cfg.stop.f_improve_tol) {
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    detail::check_finite(b.x, b.f, "max_shift");
    t.push(b.x, b.f, cosine_between(b.x - x, g));
    x = b.x;
    f = b.f;
  }
  t.terminal = {TerminalKind::max_iterations, -1};
  return t;
}

/// If the ball maximizer finds a certified local maximum strictly inside the
/// epsilon-ball, jump there and stop; otherwise move to the maximizer of the
/// difference quotient over the annulus c*eps <= |y - x_k| <= eps.
///
/// With `unregularized` the inner radius is 0 and the center limit (the
/// gradient norm) competes; when it wins the step would be of length zero and
/// the iteration stops.
template <Density D>
Trajectory max_slope_shift(const D& model, const Point& x0, const ShiftConfig& cfg) {
  cfg.validate();
  require_dim(x0, model.dim(), "max_slope_shift");
  const auto dirs = probe_directions(model.dim());
  const double eps = cfg.step;
  const double r_lo = cfg.unregularized ? 0.0 : cfg.slope_fraction * eps;
  Trajectory t;
  Point x = x0;
  double f = model.value(x);
  detail::check_finite(x, f, "max_slope_shift");
  t.start(x, f);
  for (long it = 0; it < cfg.stop.max_iters; ++it) {
    const Point g = model.gradient(x);
    BallMax b = maximize_in_ball(model, x, eps, f, g, dirs, cfg.inner);
    if (b.interior && max_eigenvalue_sym(model.hessian(b.x)) < 0.0) {
      b.x = polish_critical(model, b.x, x, eps);
      b.f = model.value(b.x);
      b.interior = (b.x - x).norm() < eps * (1.0 - cfg.inner.interior_rel);
    }
    if (b.interior && model.gradient(b.x).norm() <= cfg.stop.grad_tol &&
        max_eigenvalue_sym(model.hessian(b.x)) < 0.0) {
      if (b.f - f >= cfg.stop.f_improve_tol && b.f > f) {
        t.push(b.x, b.f, cosine_between(b.x - x, g));
      }
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    const AnnulusMax a = maximize_slope_in_annulus(model, x, r_lo, eps, f, g, dirs, cfg.inner);
    if (a.at_center_limit) {
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    const double fy = model.value(a.x);
    detail::check_finite(a.x, fy, "max_slope_shift");
    if (!(fy > f) || fy - f < cfg.stop.f_improve_tol) {
      if (!(fy > f) && g.norm() > cfg.stop.grad_tol && !cfg.unregularized &&
          detail::gain_resolvable(model, x, f, g, eps)) {
        throw SolverError("max_slope_shift: no improving point in the annulus although |grad f| = " +
                          format_double(g.norm()));
      }
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    t.push(a.x, fy, cosine_between(a.x - x, g));
    x = a.x;
    f = fy;
  }
  t.terminal = {TerminalKind::max_iterations, -1};
  return t;
}

struct MeanShiftConfig {
  double displacement_rel = 1e-10;  // stop when |MS_h(x)| < displacement_rel * h
  long max_iters = 100000;
};

/// Mean shift on the K-estimator. f_values hold the shadow estimate f^L at
/// each iterate (the function mean shift climbs), aux_values hold f^K, and the
/// cosines are taken against grad f^L.
inline Trajectory mean_shift(const Kde& K, const ShadowKde& est, const Point& x0, const MeanShiftConfig& cfg = {}) {
  if (cfg.max_iters < 1) throw InputError("mean_shift: max_iters must be at least 1");
  const Kde& L = est.kde;
  require_dim(x0, K.dim(), "mean_shift");
  Trajectory t;
  Point x = x0;
  t.start(x, L.value(x));
  t.aux_values.push_back(K.value(x));
  const double min_disp = cfg.displacement_rel * K.bandwidth();
  for (long it = 0; it < cfg.max_iters; ++it) {
    Point m;
    try {
      m = K.mean_shift_vector(x);
    } catch (const IsolatedQueryError&) {
      t.terminal = {TerminalKind::stalled, -1};
      return t;
    }
    if (!(m.norm() >= min_disp)) {
      t.terminal = {TerminalKind::converged, -1};
      return t;
    }
    const Point gl = L.gradient(x);
    x = x + m;
    t.push(x, L.value(x), cosine_between(m, gl));
    t.aux_values.push_back(K.value(x));
  }
  t.terminal = {TerminalKind::max_iterations, -1};
  return t;
}

inline Trajectory mean_shift(const Kde& kde, const Point& x0, const MeanShiftConfig& cfg = {}) {
  return mean_shift(kde, make_shadow(kde), x0, cfg);
}

// ---------------------------------------------------------------------------
// Per-step property checks

enum class ShiftKind { euler, euler_variant, level, line_search, max_shift, max_slope_shift, mean_shift };

inline std::string to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::euler: return "euler";
    case ShiftKind::euler_variant: return "euler_variant";
    case ShiftKind::level: return "level_shift";
    case ShiftKind::line_search: return "line_search";
    case ShiftKind::max_shift: return "max_shift";
    case ShiftKind::max_slope_shift: return "max_slope_shift";
    case ShiftKind::mean_shift: return "mean_shift";
  }
  return "unknown";
}

struct DiagnosticsConfig {
  ShiftKind kind = ShiftKind::max_shift;
  double step = 0.05;
  double slope_fraction = 0.5;
  bool unregularized = false;
  double grad_guard = 0.0;
  SmoothnessBounds bounds;       // of the climbed function (f^L for mean shift)
  double inner_tol = 1e-6;       // Max Shift step-length slack
  double cos_tol = 1e-12;        // exact alignment slack for gradient steps
  double eval_rel_tol = 1e-12;   // relative slack on f comparisons for non-argmax steps
  double bandwidth = 0.0;        // mean shift only

  static DiagnosticsConfig from(ShiftKind kind, const ShiftConfig& c, const SmoothnessBounds& b) {
    DiagnosticsConfig d;
    d.kind = kind;
    d.step = c.step;
    d.slope_fraction = c.slope_fraction;
    d.unregularized = c.unregularized;
    d.grad_guard = c.grad_guard;
    d.bounds = b;
    return d;
  }
};

/// Per-step outcome of the monotonicity, step-length and alignment checks.
/// A check that does not apply to the algorithm (or to the step) passes.
struct PropertyReport {
  std::vector<char> monotone;
  std::vector<char> step_ok;
  std::vector<char> angle_ok;
  long violations_monotone = 0;
  long violations_steplaw = 0;
  long violations_angle = 0;

  long total() const { return violations_monotone + violations_steplaw + violations_angle; }
};

/// Checks every step of `t` against the properties its algorithm guarantees:
/// - argmax methods (Max Shift, Max Slope Shift, Line Search): f nondecreasing exactly;
/// - Euler family: f nondecreasing up to evaluation slack, and the sufficient
///   increase (rho_k/2)|grad f|^2 when rho_k <= 1/kappa2;
/// - Mean Shift: f^L nondecreasing where f^K(x_k) >= kappa2 * rho_h;
/// - Max Shift: non-final steps in [eps - inner_tol, eps], cosine >= 1 - kappa2 eps/|grad f|;
/// - Max Slope Shift: non-final steps in [c eps, eps];
/// - Line Search: rho_k in [rho/2, rho] for non-final steps when kappa2 rho <= 1/2;
/// - Level shift: rho/kappa1 <= step <= rho/grad_guard;
/// - gradient steps: cosine = 1 within cos_tol.
template <Density D>
PropertyReport step_diagnostics(const Trajectory& t, const D& model, const DiagnosticsConfig& c) {
  PropertyReport r;
  const std::size_t K = t.num_steps();
  r.monotone.assign(K, 1);
  r.step_ok.assign(K, 1);
  r.angle_ok.assign(K, 1);
  const double k1 = c.bounds.kappa1, k2 = c.bounds.kappa2;
  const double rel_slack = 1e-12;
  for (std::size_t k = 0; k < K; ++k) {
    const bool final_step = k + 1 == K;
    const double f0 = t.f_values[k], f1 = t.f_values[k + 1];
    // step lengths are differences of stored iterates: allow their round-off
    const double len_slack =
        4.0 * std::numeric_limits<double>::epsilon() * std::max(t.points[k].norm(), t.points[k + 1].norm());
    const double len = t.step_lengths[k];
    const double eval_slack = c.eval_rel_tol * std::max(std::abs(f0), std::abs(f1));
    bool mono = true, steplaw = true, angle = true;
    switch (c.kind) {
      case ShiftKind::max_shift: {
        mono = f1 >= f0;
        if (!final_step) steplaw = len >= c.step - c.inner_tol && len <= c.step * (1.0 + rel_slack) + len_slack;
        const double gn = model.gradient(t.points[k]).norm();
        if (gn > 0.0) angle = t.align_cosines[k] >= 1.0 - k2 * c.step / gn - c.cos_tol;
        break;
      }
      case ShiftKind::max_slope_shift: {
        mono = f1 >= f0;
        const double lo = c.unregularized ? 0.0 : c.slope_fraction * c.step;
        if (!final_step) steplaw = len >= lo * (1.0 - rel_slack) - len_slack && len <= c.step * (1.0 + rel_slack) + len_slack;
        break;
      }
      case ShiftKind::line_search: {
        mono = f1 >= f0;
        const double gn = model.gradient(t.points[k]).norm();
        if (!final_step && k2 * c.step <= 0.5 && gn > 0.0) {
          const double lo = 0.5 * c.step * gn * (1.0 - rel_slack) - len_slack;
          const double hi = c.step * gn * (1.0 + rel_slack) + len_slack;
          steplaw = len >= lo && len <= hi;
        }
        angle = t.align_cosines[k] >= 1.0 - c.cos_tol;
        break;
      }
      case ShiftKind::euler:
      case ShiftKind::euler_variant: {
        mono = f1 >= f0 - eval_slack;
        const double gn = model.gradient(t.points[k]).norm();
        if (gn > 0.0) {
          const double rk = len / gn;
          if (rk * k2 <= 1.0) steplaw = f1 - f0 >= 0.5 * rk * gn * gn - eval_slack;
        }
        angle = t.align_cosines[k] >= 1.0 - c.cos_tol;
        break;
      }
      case ShiftKind::level: {
        mono = f1 >= f0 - eval_slack;
        steplaw = len >= c.step / k1 * (1.0 - rel_slack) - len_slack &&
                  (c.grad_guard <= 0.0 || len <= c.step / c.grad_guard * (1.0 + rel_slack) + len_slack);
        angle = t.align_cosines[k] >= 1.0 - c.cos_tol;
        break;
      }
      case ShiftKind::mean_shift: {
        const double fk = t.aux_values.empty() ? std::numeric_limits<double>::infinity() : t.aux_values[k];
        const double rho_h = c.step;
        if (fk >= k2 * rho_h) mono = f1 >= f0 - eval_slack;
        // The mean-shift vector and grad f^L are both sums with cancellation;
        // their round-off relative to the step grows like eps * (|x| + h) / |step|.
        if (!std::isnan(t.align_cosines[k]) && len > 0.0) {
          const double rel = 64.0 * std::numeric_limits<double>::epsilon() *
                             (t.points[k].norm() + c.bandwidth) / len;
          angle = t.align_cosines[k] >= 1.0 - 1e-9 - rel * rel;
        }
        break;
      }
    }
    r.monotone[k] = mono;
    r.step_ok[k] = steplaw;
    r.angle_ok[k] = angle;
    r.violations_monotone += !mono;
    r.violations_steplaw += !steplaw;
    r.violations_angle += !angle;
  }
  return r;
}

}  // namespace hillclimb
