#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "hillclimb/types.hpp"

namespace hillclimb {

enum class TerminalKind {
  converged_to_mode,  // endpoint matched a listed mode (mode_index set)
  converged,          // the algorithm's own stopping rule fired
  near_critical,      // gradient vanished away from any listed mode
  max_iterations,
  stalled,            // no admissible move (empty window, guard tripped, ...)
};

struct Terminal {
  TerminalKind kind = TerminalKind::max_iterations;
  int mode_index = -1;

  std::string to_string() const {
    switch (kind) {
      case TerminalKind::converged_to_mode:
        return "converged_to_mode:" + std::to_string(mode_index);
      case TerminalKind::converged:
        return "converged";
      case TerminalKind::near_critical:
        return "near_critical";
      case TerminalKind::max_iterations:
        return "max_iterations";
      case TerminalKind::stalled:
        return "stalled";
    }
    return "unknown";
  }

  bool finished() const {
    return kind == TerminalKind::converged_to_mode || kind == TerminalKind::converged ||
           kind == TerminalKind::near_critical;
  }
};

/// Iterates of an ascent procedure with per-step diagnostics.
///
/// points[k] for k = 0..K; f_values[k] is the climbed density at points[k].
/// step_lengths[k] and align_cosines[k] describe the move points[k] -> points[k+1]
/// (K entries). align_cosines is the cosine between that move and the
/// gradient at its start (NaN where the gradient vanishes). aux_values is
/// optional per-point data (the K-estimator value for Mean Shift).
struct Trajectory {
  std::vector<Point> points;
  std::vector<double> f_values;
  std::vector<double> step_lengths;
  std::vector<double> align_cosines;
  std::vector<double> aux_values;
  Terminal terminal;

  std::size_t num_steps() const { return step_lengths.size(); }
  const Point& endpoint() const { return points.back(); }
  bool empty() const { return points.empty(); }

  double arc_length() const {
    double s = 0.0;
    for (double l : step_lengths) s += l;
    return s;
  }

  void start(const Point& x0, double f0) {
    points.assign(1, x0);
    f_values.assign(1, f0);
    step_lengths.clear();
    align_cosines.clear();
    aux_values.clear();
  }

  void push(const Point& x, double f, double cosine) {
    step_lengths.push_back((x - points.back()).norm());
    align_cosines.push_back(cosine);
    points.push_back(x);
    f_values.push_back(f);
  }

  bool consistent() const {
    const auto n = points.size();
    if (n == 0 || f_values.size() != n || step_lengths.size() + 1 != n || align_cosines.size() + 1 != n) return false;
    if (!aux_values.empty() && aux_values.size() != n) return false;
    return std::all_of(f_values.begin(), f_values.end(), [](double v) { return std::isfinite(v); });
  }
};

/// Cosine between a step and a direction; NaN if either is zero.
inline double cosine_between(const Point& step, const Point& dir) {
  const double a = step.norm(), b = dir.norm();
  if (!(a > 0.0) || !(b > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return step.dot(dir) / (a * b);
}

namespace detail {

inline double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline double point_polyline_distance(const Point& p, const std::vector<Point>& line) {
  if (line.size() == 1) return (p - line.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

inline double directed_hausdorff(const std::vector<Point>& from, const std::vector<Point>& to) {
  double worst = 0.0;
  for (const auto& p : from) worst = std::max(worst, point_polyline_distance(p, to));
  return worst;
}

}  // namespace detail

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the segments of the other.
inline double trajectory_hausdorff(const Trajectory& a, const Trajectory& b) {
  if (a.empty() || b.empty()) throw InputError("trajectory_hausdorff: empty trajectory");
  if (a.points.front().size() != b.points.front().size()) {
    throw InputError("trajectory_hausdorff: dimension mismatch");
  }
  return std::max(detail::directed_hausdorff(a.points, b.points), detail::directed_hausdorff(b.points, a.points));
}

// ---------------------------------------------------------------------------
// CSV helpers shared by every writer: '.' decimal point, 17 significant digits.

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Trajectory dump: iteration, x0..x{d-1}, f, step_length, align_cosine, status.
/// The status column is filled on the last row only.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& t) {
  const auto d = t.points.empty() ? 0 : t.points.front().size();
  out << "iteration";
  for (Eigen::Index j = 0; j < d; ++j) out << ",x" << j;
  out << ",f,step_length,align_cosine,status\n";
  for (std::size_t k = 0; k < t.points.size(); ++k) {
    out << k;
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(t.points[k](j));
    out << ',' << format_double(t.f_values[k]);
    if (k == 0) {
      out << ",,";
    } else {
      out << ',' << format_double(t.step_lengths[k - 1]) << ',' << format_double(t.align_cosines[k - 1]);
    }
    out << ',' << (k + 1 == t.points.size() ? t.terminal.to_string() : std::string()) << '\n';
  }
}

}  // namespace hillclimb
