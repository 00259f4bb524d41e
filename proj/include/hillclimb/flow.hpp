#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "hillclimb/density.hpp"
#include "hillclimb/trajectory.hpp"
#include "hillclimb/types.hpp"

namespace hillclimb {

/// Settings for integrating x' = grad f(x) (or x' = N(x) in unit-speed mode).
struct FlowConfig {
  double initial_step = 1e-2;  // time units
  double max_step = 1e3;
  double rtol = 1e-9;
  double atol = 1e-9;
  double grad_stop_tol = 1e-10;
  double max_arc_length = 1e3;
  double mode_match_radius = 1e-3;
  /// Upper bound on the spatial length of one accepted step (0: unbounded).
  double max_spatial_step = 0.0;
  std::size_t max_steps = 1'000'000;
  bool unit_speed = false;

  /// Defaults tied to a model: grad_stop_tol = 1e-8 kappa1, mode_match_radius =
  /// 1e-3 of the minimum mode separation, arc cap 50 box diameters.
  static FlowConfig for_model(const SmoothnessBounds& bounds, const ModeList& modes, const Box& box) {
    FlowConfig c;
    c.grad_stop_tol = 1e-8 * bounds.kappa1;
    const double diam = box.diameter();
    c.mode_match_radius = 1e-3 * (std::isfinite(modes.min_separation) ? modes.min_separation : diam);
    c.max_arc_length = 50.0 * diam;
    return c;
  }

  void validate() const {
    if (!(initial_step > 0.0 && max_step > 0.0 && rtol > 0.0 && atol > 0.0 && grad_stop_tol > 0.0 &&
          max_arc_length > 0.0 && mode_match_radius > 0.0 && max_spatial_step >= 0.0 && max_steps > 0)) {
      throw InputError("FlowConfig: all tolerances and limits must be positive");
    }
  }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DoPri {
  static constexpr std::array<double, 6> c{1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  // b - b* (5th minus 4th order weights)
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

}  // namespace detail

/// Adaptive Dormand-Prince integration of the gradient ascent flow from x0.
///
/// Stops when |grad f| <= grad_stop_tol (near_critical), or when the arc length
/// or step count cap is hit (max_iterations). Steps are additionally capped at
/// 0.1 / |Hessian| in time (scaled by |grad f| in unit-speed mode) so the
/// integrator never jumps across a critical point.
template <Density D>
Trajectory integrate_flow(const D& model, const Point& x0, const FlowConfig& cfg) {
  cfg.validate();
  require_dim(x0, model.dim(), "integrate_flow");
  using T = detail::DoPri;

  auto field = [&](const Point& x, Point& out) {
    out = model.gradient(x);
    if (cfg.unit_speed) {
      const double n = out.norm();
      if (n > 0.0) out /= n;
    }
  };
  auto check = [](const Point& v, const char* what) {
    if (!v.allFinite()) throw IntegrationError(std::string("integrate_flow: non-finite ") + what);
  };

  Trajectory traj;
  const double f0 = model.value(x0);
  if (!std::isfinite(f0)) throw IntegrationError("integrate_flow: non-finite density at start");
  traj.start(x0, f0);

  Point x = x0;
  Point g = model.gradient(x);
  check(g, "gradient");
  double arc = 0.0;
  double h = cfg.initial_step;
  const int d = model.dim();
  Point k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), y(d), err(d);

  std::size_t steps = 0;
  while (true) {
    const double gn = g.norm();
    if (gn <= cfg.grad_stop_tol) {
      traj.terminal = {TerminalKind::near_critical, -1};
      return traj;
    }
    if (arc > cfg.max_arc_length || steps >= cfg.max_steps) {
      traj.terminal = {TerminalKind::max_iterations, -1};
      return traj;
    }

    k1 = cfg.unit_speed ? Point(g / gn) : g;
    const double curv = spectral_norm_sym(model.hessian(x));
    double cap = cfg.max_step;
    if (curv > 0.0) cap = std::min(cap, cfg.unit_speed ? 0.1 * gn / curv : 0.1 / curv);
    if (cfg.max_spatial_step > 0.0) cap = std::min(cap, cfg.max_spatial_step / k1.norm());
    h = std::min(h, cap);

    bool accepted = false;
    for (int attempt = 0; attempt < 200 && !accepted; ++attempt) {
      y = x + h * (T::a21 * k1);
      field(y, k2);
      y = x + h * (T::a31 * k1 + T::a32 * k2);
      field(y, k3);
      y = x + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3);
      field(y, k4);
      y = x + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4);
      field(y, k5);
      y = x + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5);
      field(y, k6);
      y = x + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
      field(y, k7);
      check(y, "state");
      err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
      double e2 = 0.0;
      for (int j = 0; j < d; ++j) {
        const double sc = cfg.atol + cfg.rtol * std::max(std::abs(x(j)), std::abs(y(j)));
        e2 += (err(j) / sc) * (err(j) / sc);
      }
      const double en = std::sqrt(e2 / d);
      if (en <= 1.0) {
        accepted = true;
        const double grow = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        const double f_new = model.value(y);
        if (!std::isfinite(f_new)) throw IntegrationError("integrate_flow: non-finite density");
        const double c = cosine_between(y - x, g);
        traj.push(y, f_new, c);
        arc += traj.step_lengths.back();
        x = y;
        g = model.gradient(x);
        check(g, "gradient");
        h *= grow;
      } else {
        h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.5);
        if (!(h > 0.0)) throw IntegrationError("integrate_flow: step size underflow");
      }
    }
    if (!accepted) throw IntegrationError("integrate_flow: step rejected repeatedly");
    ++steps;
  }
}

/// Flow endpoint snapped to a listed mode (converged_to_mode) when it lies
/// within mode_match_radius of one.
template <Density D>
Trajectory integrate_flow(const D& model, const Point& x0, const ModeList& modes, const FlowConfig& cfg) {
  Trajectory t = integrate_flow(model, x0, cfg);
  if (t.terminal.kind == TerminalKind::near_critical) {
    const int m = modes.nearest_within(t.endpoint(), cfg.mode_match_radius);
    if (m >= 0) t.terminal = {TerminalKind::converged_to_mode, m};
  }
  return t;
}

/// Oracle verdict for one start point.
struct BasinAssignment {
  int mode = -1;  // -1: unresolved
  Point endpoint;
  double arc_length = 0.0;
  Terminal terminal;

  bool resolved() const { return mode >= 0; }
};

/// Mode whose basin contains x0, or unresolved when the flow ends at a
/// non-maximum critical point, hits a cap, or matches no listed mode.
template <Density D>
BasinAssignment assign_basin(const D& model, const Point& x0, const ModeList& modes, const FlowConfig& cfg) {
  if (modes.empty()) throw InputError("assign_basin: empty mode list");
  const Trajectory t = integrate_flow(model, x0, modes, cfg);
  BasinAssignment a;
  a.endpoint = t.endpoint();
  a.arc_length = t.arc_length();
  a.terminal = t.terminal;
  if (t.terminal.kind == TerminalKind::converged_to_mode) {
    if (max_eigenvalue_sym(model.hessian(t.endpoint())) < 0.0) a.mode = t.terminal.mode_index;
  }
  return a;
}

}  // namespace hillclimb
