#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hillclimb/error.hpp"

namespace hillclimb {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Anything that can be evaluated like a smooth density on R^d.
template <typename D>
concept Density = requires(const D& d, const Point& x) {
  { d.dim() } -> std::convertible_to<int>;
  { d.value(x) } -> std::convertible_to<double>;
  { d.gradient(x) } -> std::convertible_to<Point>;
  { d.hessian(x) } -> std::convertible_to<Matrix>;
};

inline void require_dim(const Point& x, int dim, const char* what) {
  if (x.size() != dim) {
    throw InputError(std::string(what) + ": point has dimension " + std::to_string(x.size()) +
                     ", expected " + std::to_string(dim));
  }
}

/// Largest absolute eigenvalue of a symmetric matrix.
inline double spectral_norm_sym(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

inline double max_eigenvalue_sym(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.rows() - 1);
}

inline bool all_finite(const Point& x) { return x.allFinite(); }

/// Axis-aligned box.
struct Box {
  Point lo;
  Point hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double diameter() const { return (hi - lo).norm(); }
};

/// Regular grid over a box with `counts[i]` nodes along axis i (endpoints
/// included). Points are enumerated with the first axis varying slowest.
inline std::vector<Point> make_grid(const Box& box, const std::vector<int>& counts) {
  const int d = box.dim();
  if (d == 0 || static_cast<int>(counts.size()) != d) {
    throw InputError("make_grid: counts must have one entry per dimension");
  }
  std::size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw InputError("make_grid: counts must be positive");
    total *= static_cast<std::size_t>(c);
  }
  std::vector<Point> out;
  out.reserve(total);
  std::vector<int> idx(d, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Point p(d);
    for (int i = 0; i < d; ++i) {
      p(i) = counts[i] == 1 ? 0.5 * (box.lo(i) + box.hi(i))
                            : box.lo(i) + (box.hi(i) - box.lo(i)) * idx[i] / (counts[i] - 1);
    }
    out.push_back(std::move(p));
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

inline std::vector<Point> make_grid(const Box& box, int per_axis) {
  return make_grid(box, std::vector<int>(static_cast<std::size_t>(box.dim()), per_axis));
}

/// Lexicographic strict ordering on points of equal dimension.
inline bool lex_less(const Point& a, const Point& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (b(i) < a(i)) return false;
  }
  return false;
}

}  // namespace hillclimb
