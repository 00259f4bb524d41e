#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "hillclimb/types.hpp"

namespace hillclimb {

/// Settings for the constrained maximizers used inside Max Shift, Max Slope
/// Shift and Line Search Shift.
struct InnerSolverConfig {
  int max_refine = 20;           // projected ascent iterations after sampling
  int max_backtrack = 50;        // step halvings per iteration
  double interior_rel = 1e-9;    // |y - c| < r (1 - interior_rel) counts as interior
  double line_tol_rel = 1e-10;   // golden-section tolerance relative to rho
};

/// Deterministic probe directions: +-axes followed by 4d low-discrepancy unit
/// vectors (golden-angle in 2-D, Halton-based above).
inline std::vector<Point> probe_directions(int d) {
  std::vector<Point> dirs;
  for (int i = 0; i < d; ++i) {
    Point e = Point::Zero(d);
    e(i) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  if (d == 2) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 1; k <= 8; ++k) dirs.push_back(Point{{std::cos(k * golden), std::sin(k * golden)}});
  } else if (d >= 3) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    for (int k = 1; k <= 4 * d; ++k) {
      Point u(d);
      for (int j = 0; j < d; ++j) {
        const int base = primes[j % 16];
        double f = 1.0, r = 0.0;
        for (int n = k + j / 16; n > 0; n /= base) {
          f /= base;
          r += f * (n % base);
        }
        u(j) = 2.0 * r - 1.0;
      }
      const double n = u.norm();
      if (n > 1e-12) dirs.push_back(u / n);
    }
  }
  return dirs;
}

namespace detail {

inline Point project_ball(const Point& c, double r, const Point& z) {
  const Point v = z - c;
  const double n = v.norm();
  return n > r ? Point(c + (r / n) * v) : z;
}

inline Point project_annulus(const Point& c, double r_lo, double r_hi, const Point& z, const Point& fallback_dir) {
  Point v = z - c;
  double n = v.norm();
  if (n == 0.0) {
    v = fallback_dir;
    n = 1.0;
  }
  const double target = std::clamp(n, r_lo, r_hi);
  return c + (target / n) * v;
}

/// Strictly better value, ties broken towards the lexicographically smaller point.
inline bool better(double fa, const Point& a, double fb, const Point& b) {
  return fa > fb || (fa == fb && lex_less(a, b));
}

}  // namespace detail

struct BallMax {
  Point x;
  double f = 0.0;
  bool interior = false;
};

/// Approximate argmax of f over the closed ball B(c, r): probe the center, the
/// sphere along the probe directions and along N(c), then refine the best
/// candidate by projected Newton / gradient ascent with step halving.
template <Density D>
BallMax maximize_in_ball(const D& model, const Point& c, double r, double f_c, const Point& g_c,
                         const std::vector<Point>& dirs, const InnerSolverConfig& cfg = {}) {
  BallMax best{c, f_c, true};
  auto consider = [&](const Point& y) {
    const double fy = model.value(y);
    if (detail::better(fy, y, best.f, best.x)) {
      best.x = y;
      best.f = fy;
    }
  };
  for (const auto& u : dirs) consider(c + r * u);
  const double gn = g_c.norm();
  if (gn > 0.0) consider(c + (r / gn) * g_c);

  for (int it = 0; it < cfg.max_refine; ++it) {
    const Point g = model.gradient(best.x);
    const double gnorm = g.norm();
    if (!(gnorm > 0.0)) break;
    bool moved = false;
    const Matrix H = model.hessian(best.x);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const auto& ev = es.eigenvalues();
    if (ev(ev.size() - 1) < 0.0) {
      const Point step = -(es.eigenvectors() * ((es.eigenvectors().transpose() * g).array() / ev.array()).matrix());
      double t = 1.0;
      for (int k = 0; k < 4 && !moved; ++k, t *= 0.5) {
        const Point y = detail::project_ball(c, r, best.x + t * step);
        const double fy = model.value(y);
        if (fy > best.f) {
          best.x = y;
          best.f = fy;
          moved = true;
        }
      }
    }
    if (!moved) {
      double t = 2.0 * r / gnorm;
      for (int k = 0; k < cfg.max_backtrack && !moved; ++k, t *= 0.5) {
        const Point y = detail::project_ball(c, r, best.x + t * g);
        const double fy = model.value(y);
        if (fy > best.f) {
          best.x = y;
          best.f = fy;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  best.interior = (best.x - c).norm() < r * (1.0 - cfg.interior_rel);
  return best;
}

/// Plain Newton iterations toward a critical point, kept inside the closed
/// ball B(c, r) and accepted only while the gradient norm decreases. f is not
/// compared: near a maximum its changes drop below round-off first.
template <Density D>
Point polish_critical(const D& model, Point x, const Point& c, double r, int iters = 8) {
  Point g = model.gradient(x);
  for (int k = 0; k < iters; ++k) {
    const Matrix H = model.hessian(x);
    const Point y = detail::project_ball(c, r, x - H.ldlt().solve(g));
    if (!y.allFinite()) break;
    const Point gy = model.gradient(y);
    if (!(gy.norm() < g.norm())) break;
    x = y;
    g = gy;
  }
  return x;
}

struct AnnulusMax {
  Point x;
  double slope = -std::numeric_limits<double>::infinity();
  bool at_center_limit = false;  // r_lo == 0 and the directional-derivative limit wins
};

/// Approximate argmax of (f(y) - f(c)) / |y - c| over the closed annulus
/// r_lo <= |y - c| <= r_hi. With r_lo == 0 the value at the center is the
/// limit |grad f(c)|; if that limit is not beaten, `at_center_limit` is set.
template <Density D>
AnnulusMax maximize_slope_in_annulus(const D& model, const Point& c, double r_lo, double r_hi, double f_c,
                                     const Point& g_c, const std::vector<Point>& dirs,
                                     const InnerSolverConfig& cfg = {}) {
  AnnulusMax best;
  auto slope_at = [&](const Point& y) {
    const double rho = (y - c).norm();
    return (model.value(y) - f_c) / rho;
  };
  auto consider = [&](const Point& y) {
    const double q = slope_at(y);
    if (detail::better(q, y, best.slope, best.x.size() ? best.x : y)) {
      best.x = y;
      best.slope = q;
    }
  };
  const double gn = g_c.norm();
  const Point n_c = gn > 0.0 ? Point(g_c / gn) : dirs.front();
  const double radii[3] = {r_lo, 0.5 * (r_lo + r_hi), r_hi};
  for (double rad : radii) {
    if (!(rad > 0.0)) continue;
    for (const auto& u : dirs) consider(c + rad * u);
    if (gn > 0.0) consider(c + rad * n_c);
  }

  const double r_floor = r_lo > 0.0 ? r_lo : 1e-12 * r_hi;
  for (int it = 0; it < cfg.max_refine; ++it) {
    const Point v = best.x - c;
    const double rho = v.norm();
    const Point grad_q = model.gradient(best.x) / rho - ((model.value(best.x) - f_c) / (rho * rho * rho)) * v;
    const double qn = grad_q.norm();
    if (!(qn > 0.0)) break;
    bool moved = false;
    double t = 2.0 * r_hi / qn;
    for (int k = 0; k < cfg.max_backtrack && !moved; ++k, t *= 0.5) {
      const Point y = detail::project_annulus(c, r_floor, r_hi, best.x + t * grad_q, n_c);
      const double q = slope_at(y);
      if (q > best.slope) {
        best.x = y;
        best.slope = q;
        moved = true;
      }
    }
    if (!moved) break;
  }

  // Difference quotients at tiny radii carry round-off of order eps |f(c)| / r.
  const double noise =
      best.x.size() ? 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f_c) / (best.x - c).norm() : 0.0;
  if (r_lo == 0.0 && gn + noise >= best.slope) {
    best.at_center_limit = true;
    best.x = c;
    best.slope = gn;
  }
  return best;
}

/// Golden-section search for a maximizer of a unimodal function on [a, b].
inline double golden_section_max(const std::function<double(double)>& fn, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = fn(x1), f2 = fn(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = fn(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = fn(x1);
    }
  }
  return f1 >= f2 ? x1 : x2;
}

}  // namespace hillclimb
