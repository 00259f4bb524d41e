#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "hillclimb/types.hpp"

namespace hillclimb {

/// Exact fixed-radius neighbor queries over an immutable point set.
///
/// d <= 3 uses uniform grid hashing with a construction-time cell size;
/// higher dimensions use a k-d tree or a plain linear scan.
class RadiusIndex {
public:
  enum class Kind { grid, kdtree, linear };

  RadiusIndex() = default;

  /// `cell` is the expected query radius; it sets the grid cell size.
  RadiusIndex(std::span<const Point> points, double cell, Kind high_dim_kind = Kind::kdtree) {
    if (points.empty()) throw InputError("RadiusIndex: empty point set");
    dim_ = static_cast<int>(points.front().size());
    n_ = points.size();
    coords_.resize(n_ * static_cast<std::size_t>(dim_));
    for (std::size_t i = 0; i < n_; ++i) {
      require_dim(points[i], dim_, "RadiusIndex");
      for (int j = 0; j < dim_; ++j) coords_[i * dim_ + j] = points[i](j);
    }
    if (dim_ <= 3 && cell > 0.0 && std::isfinite(cell)) {
      kind_ = Kind::grid;
      build_grid(cell);
    } else {
      kind_ = dim_ <= 3 ? Kind::linear : high_dim_kind;
      if (kind_ == Kind::kdtree) build_kdtree();
    }
  }

  Kind kind() const { return kind_; }
  std::size_t size() const { return n_; }
  int dim() const { return dim_; }
  const double* coords(std::size_t i) const { return coords_.data() + i * dim_; }

  /// Calls fn(index, squared_distance) for every point with distance <= r.
  /// Visit order is deterministic for a fixed index and query.
  template <typename Fn>
  void for_each_within(const Point& x, double r, Fn&& fn) const {
    if (r < 0.0) return;
    const double r2 = r * r;
    switch (kind_) {
      case Kind::grid:
        grid_visit(x, r, r2, fn);
        break;
      case Kind::kdtree:
        if (!nodes_.empty()) kd_visit(0, x, r2, fn);
        break;
      case Kind::linear:
        for (std::size_t i = 0; i < n_; ++i) {
          const double d2 = dist2(x, i);
          if (d2 <= r2) fn(i, d2);
        }
        break;
    }
  }

  /// Indices with distance <= r in ascending order.
  std::vector<std::size_t> query(const Point& x, double r) const {
    std::vector<std::size_t> out;
    for_each_within(x, r, [&](std::size_t i, double) { out.push_back(i); });
    std::sort(out.begin(), out.end());
    return out;
  }

  double dist2(const Point& x, std::size_t i) const {
    const double* p = coords(i);
    double s = 0.0;
    for (int j = 0; j < dim_; ++j) {
      const double t = x(j) - p[j];
      s += t * t;
    }
    return s;
  }

private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::uint64_t h = 1469598103934665603ULL;
      for (auto v : k) {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      }
      return static_cast<std::size_t>(h);
    }
  };

  Key cell_of(const double* p) const {
    Key k{0, 0, 0};
    for (int j = 0; j < dim_; ++j) k[j] = static_cast<std::int64_t>(std::floor(p[j] / cell_));
    return k;
  }

  void build_grid(double cell) {
    cell_ = cell;
    for (std::size_t i = 0; i < n_; ++i) cells_[cell_of(coords(i))].push_back(i);
  }

  template <typename Fn>
  void grid_visit(const Point& x, double r, double r2, Fn& fn) const {
    Key lo{0, 0, 0}, hi{0, 0, 0};
    double span_cells = 1.0;
    for (int j = 0; j < dim_; ++j) {
      const double a = std::floor((x(j) - r) / cell_);
      const double b = std::floor((x(j) + r) / cell_);
      if (!std::isfinite(a) || !std::isfinite(b)) {
        span_cells = HUGE_VAL;
        break;
      }
      lo[j] = static_cast<std::int64_t>(a);
      hi[j] = static_cast<std::int64_t>(b);
      span_cells *= (b - a + 1.0);
    }
    if (span_cells > static_cast<double>(cells_.size())) {
      // Query box covers more cells than exist: scan occupied cells instead,
      // in a fixed order so results stay deterministic.
      for (std::size_t i = 0; i < n_; ++i) {
        const double d2 = dist2(x, i);
        if (d2 <= r2) fn(i, d2);
      }
      return;
    }
    Key k = lo;
    while (true) {
      auto it = cells_.find(k);
      if (it != cells_.end()) {
        for (std::size_t i : it->second) {
          const double d2 = dist2(x, i);
          if (d2 <= r2) fn(i, d2);
        }
      }
      int j = dim_ - 1;
      for (; j >= 0; --j) {
        if (++k[j] <= hi[j]) break;
        k[j] = lo[j];
      }
      if (j < 0) break;
    }
  }

  struct Node {
    std::size_t begin = 0, end = 0;  // range in perm_
    int axis = -1;                   // -1: leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  void build_kdtree() {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    nodes_.reserve(2 * n_ / kLeaf + 2);
    kd_build(0, n_);
  }

  std::size_t kd_build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeaf) return id;
    int axis = 0;
    double best_spread = -1.0;
    for (int j = 0; j < dim_; ++j) {
      double lo = HUGE_VAL, hi = -HUGE_VAL;
      for (std::size_t t = begin; t < end; ++t) {
        lo = std::min(lo, coords(perm_[t])[j]);
        hi = std::max(hi, coords(perm_[t])[j]);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        axis = j;
      }
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin), perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                     perm_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       const double ca = coords(a)[axis], cb = coords(b)[axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const double split = coords(perm_[mid])[axis];
    const std::size_t l = kd_build(begin, mid);
    const std::size_t r = kd_build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  template <typename Fn>
  void kd_visit(std::size_t id, const Point& x, double r2, Fn& fn) const {
    const Node& nd = nodes_[id];
    if (nd.axis < 0) {
      for (std::size_t t = nd.begin; t < nd.end; ++t) {
        const double d2 = dist2(x, perm_[t]);
        if (d2 <= r2) fn(perm_[t], d2);
      }
      return;
    }
    const double diff = x(nd.axis) - nd.split;
    // Left holds coords <= split, right holds coords >= split.
    if (diff <= 0.0 || diff * diff <= r2) kd_visit(nd.left, x, r2, fn);
    if (diff >= 0.0 || diff * diff <= r2) kd_visit(nd.right, x, r2, fn);
  }

  static constexpr std::size_t kLeaf = 16;

  Kind kind_ = Kind::linear;
  int dim_ = 0;
  std::size_t n_ = 0;
  std::vector<double> coords_;
  double cell_ = 0.0;
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> cells_;
  std::vector<std::size_t> perm_;
  std::vector<Node> nodes_;
};

}  // namespace hillclimb
