#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hillclimb/kernel.hpp"
#include "hillclimb/spatial_index.hpp"
#include "hillclimb/types.hpp"

namespace hillclimb {

/// h = n^(-1/(d+4)) times the average per-dimension sample standard deviation.
inline double scott_bandwidth(std::span<const Point> sample) {
  if (sample.size() < 2) throw InputError("scott_bandwidth: need at least two points");
  const auto d = sample.front().size();
  Point mean = Point::Zero(d);
  for (const auto& p : sample) mean += p;
  mean /= static_cast<double>(sample.size());
  Point var = Point::Zero(d);
  for (const auto& p : sample) var += (p - mean).cwiseAbs2();
  var /= static_cast<double>(sample.size() - 1);
  const double avg_sd = var.cwiseSqrt().mean();
  if (!(avg_sd > 0.0)) throw InputError("scott_bandwidth: degenerate sample");
  return std::pow(static_cast<double>(sample.size()), -1.0 / (static_cast<double>(d) + 4.0)) * avg_sd;
}

/// "scott": h = scott_bandwidth(sample), used directly as the support radius.
/// "scott_kernel": the same value taken as the kernel's per-coordinate
/// standard deviation, i.e. h = scott_bandwidth / profile.coordinate_sd(d).
inline double rule_bandwidth(std::span<const Point> sample, const std::string& rule, const KernelProfile& profile) {
  if (rule == "scott") return scott_bandwidth(sample);
  if (rule == "scott_kernel") {
    return scott_bandwidth(sample) / profile.coordinate_sd(static_cast<int>(sample.front().size()));
  }
  throw InputError("Kde: unknown bandwidth rule '" + rule + "'");
}

/// Kernel density estimator (1/n) sum_i K_h(x - x_i) with
/// K_h(z) = h^-d * normalizer(d) * k(|z|^2 / h^2).
///
/// Only sample points within distance h of the query contribute. The sample and
/// its spatial index are shared between copies, so `with_profile` is cheap.
class Kde {
public:
  Kde(std::vector<Point> sample, double h, KernelProfile profile = KernelProfile::triweight())
      : profile_(std::move(profile)) {
    if (sample.empty()) throw InputError("Kde: empty sample");
    if (!(h > 0.0) || !std::isfinite(h)) throw InputError("Kde: bandwidth must be positive");
    auto data = std::make_shared<Data>();
    data->dim = static_cast<int>(sample.front().size());
    for (const auto& p : sample) require_dim(p, data->dim, "Kde");
    data->h = h;
    data->sample = std::move(sample);
    data->index = RadiusIndex(data->sample, h, RadiusIndex::Kind::linear);
    data_ = std::move(data);
    update_scale();
  }

  /// Bandwidth from a rule name (see `rule_bandwidth`).
  static Kde with_rule(std::vector<Point> sample, const std::string& rule,
                       KernelProfile profile = KernelProfile::triweight()) {
    const double h = rule_bandwidth(sample, rule, profile);
    return Kde(std::move(sample), h, std::move(profile));
  }

  Kde with_profile(KernelProfile profile) const {
    Kde k = *this;
    k.profile_ = std::move(profile);
    k.update_scale();
    return k;
  }

  int dim() const { return data_->dim; }
  double bandwidth() const { return data_->h; }
  const KernelProfile& profile() const { return profile_; }
  const std::vector<Point>& sample() const { return data_->sample; }
  std::size_t size() const { return data_->sample.size(); }

  double value(const Point& x) const {
    require_dim(x, dim(), "Kde::value");
    const double inv_h2 = 1.0 / (data_->h * data_->h);
    double s = 0.0;
    data_->index.for_each_within(x, data_->h, [&](std::size_t, double d2) { s += profile_.k(d2 * inv_h2); });
    return scale_ * s;
  }

  Point gradient(const Point& x) const {
    require_dim(x, dim(), "Kde::gradient");
    if (profile_.smoothness_class() < 0) throw InputError("Kde::gradient: profile is not continuous");
    const double inv_h2 = 1.0 / (data_->h * data_->h);
    Point g = Point::Zero(dim());
    data_->index.for_each_within(x, data_->h, [&](std::size_t i, double d2) {
      const double w = profile_.dk(d2 * inv_h2);
      if (w == 0.0) return;
      const double* p = data_->index.coords(i);
      for (int j = 0; j < dim(); ++j) g(j) += w * (x(j) - p[j]);
    });
    return (scale_ * 2.0 * inv_h2) * g;
  }

  Matrix hessian(const Point& x) const {
    require_dim(x, dim(), "Kde::hessian");
    if (profile_.smoothness_class() < 2) throw InputError("Kde::hessian: profile must be at least C2");
    const double inv_h2 = 1.0 / (data_->h * data_->h);
    Matrix H = Matrix::Zero(dim(), dim());
    double diag = 0.0;
    Point z(dim());
    data_->index.for_each_within(x, data_->h, [&](std::size_t i, double d2) {
      const double u = d2 * inv_h2;
      const double* p = data_->index.coords(i);
      for (int j = 0; j < dim(); ++j) z(j) = x(j) - p[j];
      H.noalias() += (4.0 * inv_h2 * inv_h2 * profile_.d2k(u)) * (z * z.transpose());
      diag += 2.0 * inv_h2 * profile_.dk(u);
    });
    H.diagonal().array() += diag;
    return scale_ * H;
  }

  /// Kernel-weighted mean of the in-window sample minus x. Throws
  /// IsolatedQueryError when the window is empty.
  Point mean_shift_vector(const Point& x) const {
    require_dim(x, dim(), "Kde::mean_shift_vector");
    const double inv_h2 = 1.0 / (data_->h * data_->h);
    Point num = Point::Zero(dim());
    double den = 0.0;
    data_->index.for_each_within(x, data_->h, [&](std::size_t i, double d2) {
      const double w = profile_.k(d2 * inv_h2);
      if (w == 0.0) return;
      const double* p = data_->index.coords(i);
      for (int j = 0; j < dim(); ++j) num(j) += w * p[j];
      den += w;
    });
    if (!(den > 0.0)) throw IsolatedQueryError("mean_shift_vector: no sample point within the bandwidth");
    return num / den - x;
  }

  /// Number of sample points strictly inside the kernel window.
  std::size_t window_count(const Point& x) const {
    std::size_t c = 0;
    const double h2 = data_->h * data_->h;
    data_->index.for_each_within(x, data_->h, [&](std::size_t, double d2) { c += d2 < h2 ? 1 : 0; });
    return c;
  }

private:
  struct Data {
    std::vector<Point> sample;
    RadiusIndex index;
    int dim = 0;
    double h = 0.0;
  };

  void update_scale() {
    scale_ = profile_.normalizer(dim()) / (static_cast<double>(data_->sample.size()) * std::pow(data_->h, dim()));
  }

  std::shared_ptr<const Data> data_;
  KernelProfile profile_;
  double scale_ = 0.0;
};

/// The L-kernel estimator built from the same sample and bandwidth, plus the
/// constant c linking mean shift to its gradient.
struct ShadowKde {
  Kde kde;
  ShadowProfile shadow;

  /// h^2 / (2c): the step size of the equivalent gradient scheme.
  double step() const { return kde.bandwidth() * kde.bandwidth() / (2.0 * shadow.c); }
};

inline ShadowKde make_shadow(const Kde& base) {
  ShadowProfile s = shadow(base.profile(), base.dim());
  return ShadowKde{base.with_profile(s.profile), s};
}

// ---------------------------------------------------------------------------

struct Deviation {
  double eta0 = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;

  double max() const { return std::max({eta0, eta1, eta2}); }
};

/// Grid maxima of |fA - fB|, |grad fA - grad fB| and the spectral norm of the
/// Hessian difference.
template <Density A, Density B>
Deviation sup_deviation(const A& fa, const B& fb, std::span<const Point> grid) {
  if (grid.empty()) throw InputError("sup_deviation: empty grid");
  if (fa.dim() != fb.dim()) throw InputError("sup_deviation: dimension mismatch");
  Deviation d;
  for (const auto& x : grid) {
    d.eta0 = std::max(d.eta0, std::abs(fa.value(x) - fb.value(x)));
    d.eta1 = std::max(d.eta1, (fa.gradient(x) - fb.gradient(x)).norm());
    d.eta2 = std::max(d.eta2, spectral_norm_sym(fa.hessian(x) - fb.hessian(x)));
  }
  return d;
}

}  // namespace hillclimb
