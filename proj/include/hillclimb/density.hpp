#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hillclimb/gaussian_mixture.hpp"
#include "hillclimb/log.hpp"
#include "hillclimb/types.hpp"

namespace hillclimb {

/// Unit vector along the gradient. Throws NearCriticalError when the gradient
/// norm does not exceed `grad_tol`; callers treat that as a stop signal.
template <Density D>
Point normalized_gradient(const D& model, const Point& x, double grad_tol) {
  Point g = model.gradient(x);
  const double n = g.norm();
  if (!(n > grad_tol)) {
    throw NearCriticalError("normalized_gradient: gradient norm " + std::to_string(n) +
                            " is below tolerance " + std::to_string(grad_tol));
  }
  return g / n;
}

// ---------------------------------------------------------------------------
// Mode enumeration

struct ModeSearchOptions {
  double mode_tol = 1e-10;       // gradient norm accepted as critical
  double dedupe_radius = 1e-6;   // converged points closer than this are merged
  int max_newton = 100;
  /// Converged points whose value is below this fraction of the best mode are
  /// dropped (far-field plateaus where the gradient underflows).
  double min_relative_value = 1e-8;
};

struct ModeList {
  std::vector<Point> modes;
  std::vector<double> gradient_norms;
  std::vector<double> values;
  std::vector<double> max_hessian_eigenvalues;
  double min_separation = std::numeric_limits<double>::infinity();

  std::size_t size() const { return modes.size(); }
  bool empty() const { return modes.empty(); }

  /// Index of the closest mode within `radius`, or -1.
  int nearest_within(const Point& x, double radius) const {
    int best = -1;
    double best_d = radius;
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const double d = (modes[i] - x).norm();
      if (d <= best_d) {
        if (best < 0 || d < best_d) {
          best = static_cast<int>(i);
          best_d = d;
        }
      }
    }
    return best;
  }

  double max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
};

namespace detail {

/// Safeguarded Newton ascent: Newton steps where the Hessian is negative
/// definite (halved while they increase the gradient norm), backtracked
/// gradient ascent elsewhere. Returns false on divergence.
template <Density D>
bool refine_to_mode(const D& model, Point& x, const ModeSearchOptions& opt) {
  for (int it = 0; it < opt.max_newton; ++it) {
    const Point g = model.gradient(x);
    const double gn = g.norm();
    if (!std::isfinite(gn)) return false;
    if (gn <= opt.mode_tol) return true;
    const Matrix h = model.hessian(x);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const auto& ev = es.eigenvalues();
    bool moved = false;
    if (ev(ev.size() - 1) < 0.0) {
      const Point step = -(es.eigenvectors() *
                           ((es.eigenvectors().transpose() * g).array() / ev.array()).matrix());
      double t = 1.0;
      for (int k = 0; k < 40; ++k, t *= 0.5) {
        const Point y = x + t * step;
        if (model.gradient(y).norm() < gn) {
          x = y;
          moved = true;
          break;
        }
      }
    }
    if (!moved) {
      const double curv = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
      if (!(curv > 0.0)) return false;
      const double f0 = model.value(x);
      double t = 1.0 / curv;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        const Point y = x + t * g;
        if (model.value(y) > f0) {
          x = y;
          moved = true;
          break;
        }
      }
    }
    if (!moved) return model.gradient(x).norm() <= opt.mode_tol;
  }
  return model.gradient(x).norm() <= opt.mode_tol;
}

}  // namespace detail

/// Local maxima reached from the seeds, deduplicated and sorted
/// lexicographically. Seeds that diverge or land on saddles are discarded.
template <Density D>
ModeList find_modes(const D& model, std::span<const Point> seeds, const ModeSearchOptions& opt = {}) {
  if (seeds.empty()) throw InputError("find_modes: no seeds");
  struct Found {
    Point x;
    double f, gn, lmax;
  };
  std::vector<Found> found;
  std::size_t discarded = 0;
  for (const auto& s : seeds) {
    require_dim(s, model.dim(), "find_modes");
    Point x = s;
    if (!detail::refine_to_mode(model, x, opt)) {
      ++discarded;
      continue;
    }
    const double lmax = max_eigenvalue_sym(model.hessian(x));
    if (!(lmax < 0.0)) {
      ++discarded;
      continue;
    }
    bool dup = false;
    for (const auto& f : found) {
      if ((f.x - x).norm() < opt.dedupe_radius) {
        dup = true;
        break;
      }
    }
    if (!dup) found.push_back({x, model.value(x), model.gradient(x).norm(), lmax});
  }
  if (discarded > 0) {
    log(LogLevel::debug, "find_modes: discarded " + std::to_string(discarded) + " seed(s)");
  }
  double best = 0.0;
  for (const auto& f : found) best = std::max(best, f.f);
  std::erase_if(found, [&](const Found& f) { return !(f.f > opt.min_relative_value * best); });
  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) { return lex_less(a.x, b.x); });

  ModeList out;
  for (auto& f : found) {
    out.modes.push_back(f.x);
    out.values.push_back(f.f);
    out.gradient_norms.push_back(f.gn);
    out.max_hessian_eigenvalues.push_back(f.lmax);
  }
  for (std::size_t i = 0; i < out.modes.size(); ++i) {
    for (std::size_t j = i + 1; j < out.modes.size(); ++j) {
      out.min_separation = std::min(out.min_separation, (out.modes[i] - out.modes[j]).norm());
    }
  }
  return out;
}

/// Component means plus a coarse grid over means +- 3 sigma.
inline std::vector<Point> default_mode_seeds(const GaussianMixture& m) {
  std::vector<Point> seeds;
  for (const auto& c : m.components()) seeds.push_back(c.mean);
  if (m.dim() <= 3) {
    const int per_axis = m.dim() == 1 ? 25 : (m.dim() == 2 ? 12 : 6);
    auto grid = make_grid(m.bounding_box(3.0), per_axis);
    seeds.insert(seeds.end(), grid.begin(), grid.end());
  }
  return seeds;
}

inline ModeList find_modes(const GaussianMixture& m, const ModeSearchOptions& opt = {}) {
  const auto seeds = default_mode_seeds(m);
  return find_modes(m, std::span<const Point>(seeds), opt);
}

// ---------------------------------------------------------------------------
// Smoothness bounds

/// Grid maxima of value, gradient norm and Hessian spectral norm. These are
/// lower estimates of the true suprema.
struct SmoothnessBounds {
  double kappa0 = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double grid_resolution = 0.0;
};

template <Density D>
SmoothnessBounds estimate_bounds(const D& model, std::span<const Point> grid, double grid_resolution = 0.0) {
  if (grid.empty()) throw InputError("estimate_bounds: empty grid");
  SmoothnessBounds b;
  b.grid_resolution = grid_resolution;
  for (const auto& x : grid) {
    b.kappa0 = std::max(b.kappa0, model.value(x));
    b.kappa1 = std::max(b.kappa1, model.gradient(x).norm());
    b.kappa2 = std::max(b.kappa2, spectral_norm_sym(model.hessian(x)));
  }
  return b;
}

/// Bounds on a regular grid over `box` with `per_axis` nodes per axis.
template <Density D>
SmoothnessBounds estimate_bounds(const D& model, const Box& box, int per_axis) {
  const auto grid = make_grid(box, per_axis);
  const double res = per_axis > 1 ? (box.hi - box.lo).maxCoeff() / (per_axis - 1) : 0.0;
  return estimate_bounds(model, std::span<const Point>(grid), res);
}

/// Default bounds for a mixture: grid over means +- 5 sigma.
inline SmoothnessBounds estimate_bounds(const GaussianMixture& m) {
  const int per_axis = m.dim() == 1 ? 4001 : (m.dim() == 2 ? 201 : 41);
  auto bounds = estimate_bounds(m, m.bounding_box(5.0), per_axis);
  // Mode values are exact maxima candidates; fold them in.
  for (const auto& c : m.components()) bounds.kappa0 = std::max(bounds.kappa0, m.value(c.mean));
  return bounds;
}

}  // namespace hillclimb
