#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "hillclimb/error.hpp"

namespace hillclimb {

/// Radial kernel profile k(u) = (1 - u)^m on [0, 1), zero for u >= 1, where u
/// is the squared scaled distance. The kernel in dimension d is
/// K(x) = normalizer(d) * k(|x|^2).
///
///   m = 0  flat        (discontinuous, test use)
///   m = 1  Epanechnikov
///   m = 2  biweight
///   m = 3  triweight   (default: k, k', k'' all vanish at u = 1)
class KernelProfile {
public:
  explicit KernelProfile(int exponent, std::string name = {}) : m_(exponent), name_(std::move(name)) {
    if (m_ < 0) throw InputError("KernelProfile: exponent must be nonnegative (k must be nonincreasing)");
    if (name_.empty()) name_ = "power" + std::to_string(m_);
  }

  static KernelProfile flat() { return KernelProfile(0, "flat"); }
  static KernelProfile epanechnikov() { return KernelProfile(1, "epanechnikov"); }
  static KernelProfile biweight() { return KernelProfile(2, "biweight"); }
  static KernelProfile triweight() { return KernelProfile(3, "triweight"); }

  /// "flat", "epanechnikov", "biweight", "triweight" or "power<m>".
  static KernelProfile by_name(const std::string& name) {
    if (name == "flat") return flat();
    if (name == "epanechnikov") return epanechnikov();
    if (name == "biweight") return biweight();
    if (name == "triweight") return triweight();
    if (name.rfind("power", 0) == 0 && name.size() > 5) {
      int m = -1;
      auto res = std::from_chars(name.data() + 5, name.data() + name.size(), m);
      if (res.ec == std::errc() && res.ptr == name.data() + name.size() && m >= 0) return KernelProfile(m, name);
    }
    throw InputError("unknown kernel profile '" + name + "'");
  }

  int exponent() const { return m_; }
  const std::string& name() const { return name_; }

  /// Order of continuous differentiability of K on R^d (-1: discontinuous).
  int smoothness_class() const { return m_ - 1; }

  double k(double u) const {
    if (u >= 1.0) return 0.0;
    return ipow(1.0 - std::max(u, 0.0), m_);
  }
  double dk(double u) const {
    if (u >= 1.0 || m_ == 0) return 0.0;
    return -m_ * ipow(1.0 - u, m_ - 1);
  }
  double d2k(double u) const {
    if (u >= 1.0 || m_ < 2) return 0.0;
    return m_ * (m_ - 1) * ipow(1.0 - u, m_ - 2);
  }

  /// Integral of k(|x|^2) over R^d, closed form:
  /// pi^(d/2) * Gamma(m+1) / Gamma(d/2 + m + 1).
  double mass(int d) const {
    if (d < 1) throw InputError("KernelProfile::mass: dimension must be positive");
    const double half = 0.5 * d;
    return std::exp(half * std::log(std::numbers::pi) + std::lgamma(m_ + 1.0) - std::lgamma(half + m_ + 1.0));
  }
  double normalizer(int d) const { return 1.0 / mass(d); }

  /// Per-coordinate standard deviation of the normalized kernel at unit
  /// bandwidth: |x|^2 ~ Beta(d/2, m+1), so the variance is 1/(d + 2m + 2).
  double coordinate_sd(int d) const {
    if (d < 1) throw InputError("KernelProfile::coordinate_sd: dimension must be positive");
    return 1.0 / std::sqrt(static_cast<double>(d + 2 * m_ + 2));
  }

  friend bool operator==(const KernelProfile& a, const KernelProfile& b) { return a.m_ == b.m_; }

private:
  static double ipow(double b, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
  }

  int m_;
  std::string name_;
};

/// Shadow of a kernel: l(u) = c * int_u^inf kK(v) dv, where kK = normalizer(d) * k
/// is the profile of the normalized base kernel and c makes L(x) = l(|x|^2)
/// integrate to one. With this convention the mean shift step equals
/// (h^2 / 2c) * grad(L-KDE) / K-KDE for the normalized estimators.
struct ShadowProfile {
  KernelProfile base;
  KernelProfile profile;  // (1-u)^(m+1), the shape of l
  int dim = 1;
  double c = 1.0;

  double l(double u) const {
    return c * base.normalizer(dim) * profile.k(u) / static_cast<double>(profile.exponent());
  }
  /// Normalized shadow kernel profile value (equals l(u)).
  double normalized(double u) const { return profile.normalizer(dim) * profile.k(u); }
};

inline ShadowProfile shadow(const KernelProfile& base, int dim) {
  if (dim < 1) throw InputError("shadow: dimension must be positive");
  const KernelProfile next(base.exponent() + 1, "shadow(" + base.name() + ")");
  ShadowProfile s{base, next, dim, 1.0};
  // c * N_K / (m+1) = N_L
  s.c = next.normalizer(dim) * next.exponent() / base.normalizer(dim);
  return s;
}

}  // namespace hillclimb
