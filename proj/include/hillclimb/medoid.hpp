#pragma once

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "hillclimb/kernel.hpp"
#include "hillclimb/spatial_index.hpp"
#include "hillclimb/trajectory.hpp"

namespace hillclimb {

/// What the medoid algorithms may touch: a finite set with density values,
/// distances from a query to each element, closed-ball queries (ascending
/// indices), and the value at a query. Nothing else.
template <typename M>
concept MetricSpace = requires(const M& m, std::size_t i, const typename M::Query& q, double r) {
  typename M::Query;
  { m.size() } -> std::convertible_to<std::size_t>;
  { m.value(i) } -> std::convertible_to<double>;
  { m.distance(q, i) } -> std::convertible_to<double>;
  { m.ball(q, r) } -> std::convertible_to<std::vector<std::size_t>>;
  { m.query_of(i) } -> std::convertible_to<typename M::Query>;
  { m.query_value(q) } -> std::convertible_to<double>;
};

/// A finite Euclidean point set Y with density values and an exact radius index.
class MedoidSet {
public:
  using Query = Point;
  using Evaluator = std::function<double(const Point&)>;

  /// Values are taken from `f`, which is kept to evaluate non-medoid queries.
  /// `cell` sets the grid-index cell size (0 picks one from the point spread).
  MedoidSet(std::vector<Point> points, Evaluator f, double cell = 0.0)
      : points_(std::move(points)), eval_(std::move(f)) {
    if (points_.empty()) throw InputError("MedoidSet: empty point set");
    if (!eval_) throw InputError("MedoidSet: missing density evaluator");
    values_.reserve(points_.size());
    for (const auto& p : points_) values_.push_back(eval_(p));
    build_index(cell);
  }

  template <Density D>
  static MedoidSet from_model(std::vector<Point> points, const D& model, double cell = 0.0) {
    return MedoidSet(std::move(points), [model](const Point& x) { return model.value(x); }, cell);
  }

  std::size_t size() const { return points_.size(); }
  int dim() const { return static_cast<int>(points_.front().size()); }
  double value(std::size_t i) const { return values_[i]; }
  const Point& point(std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<double>& values() const { return values_; }

  double distance(const Query& q, std::size_t i) const { return (q - points_[i]).norm(); }
  std::vector<std::size_t> ball(const Query& q, double r) const { return index_.query(q, r); }
  Query query_of(std::size_t i) const { return points_[i]; }
  double query_value(const Query& q) const { return eval_(q); }

  /// Index and distance of the nearest medoid (smallest index on ties).
  std::pair<std::size_t, double> nearest(const Point& x) const {
    double r = cell_ > 0.0 ? cell_ : 1.0;
    for (;;) {
      std::size_t best = size();
      double best_d2 = std::numeric_limits<double>::infinity();
      index_.for_each_within(x, r, [&](std::size_t i, double d2) {
        if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
          best = i;
          best_d2 = d2;
        }
      });
      if (best < size()) return {best, std::sqrt(best_d2)};
      r *= 2.0;
    }
  }

private:
  void build_index(double cell) {
    if (!(cell > 0.0)) {
      Point lo = points_.front(), hi = points_.front();
      for (const auto& p : points_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      const double extent = (hi - lo).maxCoeff();
      const double per_axis = std::pow(static_cast<double>(points_.size()), 1.0 / dim());
      cell = extent > 0.0 ? 2.0 * extent / per_axis : 1.0;
    }
    cell_ = cell;
    index_ = RadiusIndex(points_, cell);
  }

  std::vector<Point> points_;
  std::vector<double> values_;
  Evaluator eval_;
  RadiusIndex index_;
  double cell_ = 0.0;
};

/// Iterates of a medoid algorithm: the start query followed by medoid indices.
template <typename Query>
struct MedoidPath {
  Query start;
  double f_start = 0.0;
  std::vector<std::size_t> indices;
  std::vector<double> f_values;      // f_start first, then one per index
  std::vector<double> step_lengths;  // one per index
  Terminal terminal;

  std::size_t num_steps() const { return indices.size(); }
  double final_value() const { return f_values.back(); }
  bool at_start() const { return indices.empty(); }
};

namespace detail {

template <MetricSpace M>
MedoidPath<typename M::Query> start_path(const M& Y, const typename M::Query& x0) {
  MedoidPath<typename M::Query> p;
  p.start = x0;
  p.f_start = Y.query_value(x0);
  p.f_values.push_back(p.f_start);
  return p;
}

template <MetricSpace M>
typename M::Query current_query(const M& Y, const MedoidPath<typename M::Query>& p) {
  return p.indices.empty() ? p.start : Y.query_of(p.indices.back());
}

template <MetricSpace M>
void push_step(const M& Y, MedoidPath<typename M::Query>& p, std::size_t j) {
  p.step_lengths.push_back(Y.distance(current_query(Y, p), j));
  p.indices.push_back(j);
  p.f_values.push_back(Y.value(j));
}

inline void require_radius(double r, const char* what) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InputError(std::string(what) + ": radius must be positive");
}

}  // namespace detail

/// True when x0 coincides with an element of Y.
template <MetricSpace M>
bool is_medoid(const M& Y, const typename M::Query& x0) {
  return !Y.ball(x0, 0.0).empty();
}

/// x_{k+1} = argmax of f over Y within the closed eps-ball of x_k (smallest
/// index on ties). A start outside Y always moves to its ball maximizer;
/// afterwards the run stops once the maximizer does not strictly increase f.
/// No medoid within eps of the start gives terminal `stalled`.
template <MetricSpace M>
MedoidPath<typename M::Query> medoid_max_shift(const M& Y, const typename M::Query& x0, double eps) {
  detail::require_radius(eps, "medoid_max_shift");
  auto p = detail::start_path(Y, x0);
  const bool snap = !is_medoid(Y, x0);
  for (std::size_t it = 0; it <= Y.size(); ++it) {
    const auto q = detail::current_query(Y, p);
    const auto in_ball = Y.ball(q, eps);
    if (in_ball.empty()) {
      p.terminal = {TerminalKind::stalled, -1};
      return p;
    }
    std::size_t best = in_ball.front();
    for (std::size_t j : in_ball) {
      if (Y.value(j) > Y.value(best)) best = j;
    }
    const bool first_snap = snap && p.indices.empty();
    if (!first_snap && !(Y.value(best) > p.f_values.back())) {
      p.terminal = {TerminalKind::converged, -1};
      return p;
    }
    detail::push_step(Y, p, best);
  }
  p.terminal = {TerminalKind::max_iterations, -1};
  return p;
}

/// x_{k+1} = argmax over in-ball medoids y != x_k of (f(y) - f(x_k)) / d(y, x_k);
/// stops when no in-ball medoid strictly increases f.
template <MetricSpace M>
MedoidPath<typename M::Query> medoid_max_slope_shift(const M& Y, const typename M::Query& x0, double eps) {
  detail::require_radius(eps, "medoid_max_slope_shift");
  auto p = detail::start_path(Y, x0);
  for (std::size_t it = 0; it <= Y.size(); ++it) {
    const auto q = detail::current_query(Y, p);
    const double fq = p.f_values.back();
    std::size_t best = Y.size();
    double best_slope = 0.0;
    for (std::size_t j : Y.ball(q, eps)) {
      if (!(Y.value(j) > fq)) continue;
      const double d = Y.distance(q, j);
      if (!(d > 0.0)) continue;
      const double slope = (Y.value(j) - fq) / d;
      if (best == Y.size() || slope > best_slope) {
        best = j;
        best_slope = slope;
      }
    }
    if (best == Y.size()) {
      p.terminal = {TerminalKind::converged, -1};
      return p;
    }
    detail::push_step(Y, p, best);
  }
  p.terminal = {TerminalKind::max_iterations, -1};
  return p;
}

/// x_{k+1} = the nearest in-ball medoid with strictly larger f (smallest
/// index on distance ties); stops when none exists.
template <MetricSpace M>
MedoidPath<typename M::Query> quick_shift(const M& Y, const typename M::Query& x0, double eps) {
  detail::require_radius(eps, "quick_shift");
  auto p = detail::start_path(Y, x0);
  for (std::size_t it = 0; it <= Y.size(); ++it) {
    const auto q = detail::current_query(Y, p);
    const double fq = p.f_values.back();
    std::size_t best = Y.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j : Y.ball(q, eps)) {
      if (!(Y.value(j) > fq)) continue;
      const double d = Y.distance(q, j);
      if (d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best == Y.size()) {
      p.terminal = {TerminalKind::converged, -1};
      return p;
    }
    detail::push_step(Y, p, best);
  }
  p.terminal = {TerminalKind::max_iterations, -1};
  return p;
}

enum class MedoidShiftForm {
  anchored,  // weights k(d(y*, x_k)^2 / h^2)
  printed,   // weights k(d(y*, y)^2 / h^2), independent of x_k
};

/// x_{k+1} = argmin over y in Y of sum_{y*} d(y*, y)^2 w(y*, ...), smallest
/// index on ties; stops at a fixed point. With the anchored form, an empty
/// window at x_k gives terminal `stalled`.
template <MetricSpace M>
MedoidPath<typename M::Query> medoid_shift(const M& Y, const typename M::Query& x0, double h,
                                           const KernelProfile& profile,
                                           MedoidShiftForm form = MedoidShiftForm::anchored) {
  detail::require_radius(h, "medoid_shift");
  const double inv_h2 = 1.0 / (h * h);
  auto p = detail::start_path(Y, x0);
  const std::size_t n = Y.size();
  for (std::size_t it = 0; it <= n; ++it) {
    const auto q = detail::current_query(Y, p);
    std::size_t best = n;
    double best_cost = std::numeric_limits<double>::infinity();
    if (form == MedoidShiftForm::anchored) {
      std::vector<std::pair<std::size_t, double>> window;
      for (std::size_t j : Y.ball(q, h)) {
        const double dq = Y.distance(q, j);
        const double w = profile.k(dq * dq * inv_h2);
        if (w > 0.0) window.emplace_back(j, w);
      }
      if (window.empty()) {
        p.terminal = {TerminalKind::stalled, -1};
        return p;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto yi = Y.query_of(i);
        double cost = 0.0;
        for (const auto& [j, w] : window) {
          const double d = Y.distance(yi, j);
          cost += w * d * d;
        }
        if (cost < best_cost) {
          best = i;
          best_cost = cost;
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const auto yi = Y.query_of(i);
        double cost = 0.0;
        for (std::size_t j : Y.ball(yi, h)) {
          const double d = Y.distance(yi, j);
          cost += profile.k(d * d * inv_h2) * d * d;
        }
        if (cost < best_cost) {
          best = i;
          best_cost = cost;
        }
      }
    }
    if (!p.indices.empty() && best == p.indices.back()) {
      p.terminal = {TerminalKind::converged, -1};
      return p;
    }
    if (p.indices.empty() && Y.distance(q, best) == 0.0) {
      p.terminal = {TerminalKind::converged, -1};
      return p;
    }
    detail::push_step(Y, p, best);
  }
  p.terminal = {TerminalKind::max_iterations, -1};
  return p;
}

/// Endpoint of a path as a query.
template <MetricSpace M>
typename M::Query endpoint(const M& Y, const MedoidPath<typename M::Query>& p) {
  return detail::current_query(Y, p);
}

/// Closed-ball query: indices with distance <= r, ascending.
inline std::vector<std::size_t> radius_query(const MedoidSet& Y, const Point& x, double r) {
  if (!(r >= 0.0)) throw InputError("radius_query: radius must be nonnegative");
  return Y.ball(x, r);
}

/// Euclidean polyline of a medoid path.
inline Trajectory to_trajectory(const MedoidSet& Y, const MedoidPath<Point>& p) {
  Trajectory t;
  t.start(p.start, p.f_start);
  for (std::size_t k = 0; k < p.indices.size(); ++k) {
    t.push(Y.point(p.indices[k]), p.f_values[k + 1], std::numeric_limits<double>::quiet_NaN());
  }
  t.terminal = p.terminal;
  return t;
}

struct MedoidReport {
  bool endpoint_certified = true;  // f(endpoint) >= f(y) for every y within eps of it
  long violations_monotone = 0;    // steps that did not strictly increase f (after an initial snap)
  long violations_alternating = 0; // consecutive non-final steps both of length <= eps/2
};

/// Checks the medoid Max Shift guarantees on one path. `snapped` marks a
/// start outside Y whose first move is exempt from the monotonicity check.
template <MetricSpace M>
MedoidReport medoid_diagnostics(const M& Y, const MedoidPath<typename M::Query>& p, double eps, bool snapped) {
  MedoidReport r;
  const auto end = endpoint(Y, p);
  const double f_end = p.f_values.back();
  for (std::size_t j : Y.ball(end, eps)) {
    if (Y.value(j) > f_end) r.endpoint_certified = false;
  }
  const std::size_t K = p.num_steps();
  for (std::size_t k = 0; k < K; ++k) {
    if (k == 0 && snapped) continue;
    if (!(p.f_values[k + 1] > p.f_values[k])) ++r.violations_monotone;
  }
  // steps k and k+1 both non-final means k + 1 < K - 1
  for (std::size_t k = snapped ? 1 : 0; k + 2 < K; ++k) {
    if (p.step_lengths[k] <= 0.5 * eps && p.step_lengths[k + 1] <= 0.5 * eps) ++r.violations_alternating;
  }
  return r;
}

struct CoveringRadius {
  double level = 0.0;
  double alpha = 0.0;
  double grid_resolution = 0.0;
  std::size_t grid_points_in_level = 0;
};

/// Largest nearest-medoid distance over the grid points with f >= s.
template <Density D>
CoveringRadius covering_radius(const MedoidSet& Y, const D& model, double s, std::span<const Point> grid,
                               double grid_resolution = 0.0) {
  if (!(s > 0.0)) throw InputError("covering_radius: level must be positive");
  CoveringRadius c;
  c.level = s;
  c.grid_resolution = grid_resolution;
  for (const auto& x : grid) {
    if (!(model.value(x) >= s)) continue;
    ++c.grid_points_in_level;
    c.alpha = std::max(c.alpha, Y.nearest(x).second);
  }
  if (c.grid_points_in_level == 0) throw InputError("covering_radius: no grid point reaches the level");
  return c;
}

}  // namespace hillclimb
