#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hillclimb/log.hpp"
#include "hillclimb/types.hpp"

namespace hillclimb {

struct GaussianComponent {
  double weight = 1.0;
  Point mean;
  Matrix cov;
};

/// Finite mixture of multivariate normals with exact derivatives.
///
/// Immutable after construction; every query is const and thread-safe.
class GaussianMixture {
public:
  /// Validates the components. Weights are rescaled to sum to one; a warning
  /// is logged when the input sum is off by more than 1e-9.
  explicit GaussianMixture(std::vector<GaussianComponent> components)
      : components_(std::move(components)) {
    if (components_.empty()) throw InputError("GaussianMixture: no components");
    dim_ = static_cast<int>(components_.front().mean.size());
    if (dim_ < 1) throw InputError("GaussianMixture: dimension must be positive");

    double total = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i) {
      const auto& c = components_[i];
      const std::string tag = "GaussianMixture: component " + std::to_string(i);
      if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw InputError(tag + " weight must be positive");
      if (c.mean.size() != dim_) throw InputError(tag + " mean has wrong dimension");
      if (c.cov.rows() != dim_ || c.cov.cols() != dim_) throw InputError(tag + " covariance has wrong shape");
      if (!c.mean.allFinite() || !c.cov.allFinite()) throw InputError(tag + " has non-finite entries");
      const double scale = std::max(1.0, c.cov.cwiseAbs().maxCoeff());
      if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InputError(tag + " covariance is not symmetric");
      }
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      log(LogLevel::warning, "GaussianMixture: weights sum to " + std::to_string(total) + ", renormalizing");
    }

    const double log2pi = std::log(2.0 * std::numbers::pi);
    cache_.reserve(components_.size());
    for (auto& c : components_) {
      c.weight /= total;
      Eigen::SelfAdjointEigenSolver<Matrix> es(c.cov);
      if (es.eigenvalues()(0) <= 0.0) throw InputError("GaussianMixture: covariance is not positive definite");
      Eigen::LLT<Matrix> llt(c.cov);
      Cached k;
      k.precision = llt.solve(Matrix::Identity(dim_, dim_));
      k.precision = 0.5 * (k.precision + k.precision.transpose());
      k.chol = llt.matrixL();
      const double logdet = 2.0 * k.chol.diagonal().array().log().sum();
      k.log_coef = std::log(c.weight) - 0.5 * (dim_ * log2pi + logdet);
      cache_.push_back(std::move(k));
    }
  }

  int dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double value(const Point& x) const {
    require_dim(x, dim_, "GaussianMixture::value");
    double sum = 0.0;
    for (std::size_t i = 0; i < components_.size(); ++i) sum += component_value(i, x);
    return sum;
  }

  Point gradient(const Point& x) const {
    require_dim(x, dim_, "GaussianMixture::gradient");
    Point g = Point::Zero(dim_);
    for (std::size_t i = 0; i < components_.size(); ++i) {
      const Point z = x - components_[i].mean;
      const double v = std::exp(cache_[i].log_coef - 0.5 * z.dot(cache_[i].precision * z));
      g.noalias() -= v * (cache_[i].precision * z);
    }
    return g;
  }

  Matrix hessian(const Point& x) const {
    require_dim(x, dim_, "GaussianMixture::hessian");
    Matrix h = Matrix::Zero(dim_, dim_);
    for (std::size_t i = 0; i < components_.size(); ++i) {
      const Point z = x - components_[i].mean;
      const Point pz = cache_[i].precision * z;
      const double v = std::exp(cache_[i].log_coef - 0.5 * z.dot(pz));
      h.noalias() += v * (pz * pz.transpose() - cache_[i].precision);
    }
    return h;
  }

  /// Per-axis standard deviation envelope: means +- k standard deviations.
  Box bounding_box(double k_sigma) const {
    Box b{Point::Constant(dim_, std::numeric_limits<double>::infinity()),
          Point::Constant(dim_, -std::numeric_limits<double>::infinity())};
    for (const auto& c : components_) {
      const Point sd = c.cov.diagonal().cwiseSqrt();
      b.lo = b.lo.cwiseMin(c.mean - k_sigma * sd);
      b.hi = b.hi.cwiseMax(c.mean + k_sigma * sd);
    }
    return b;
  }

  /// Largest per-axis standard deviation over all components.
  double max_sigma() const {
    double s = 0.0;
    for (const auto& c : components_) s = std::max(s, std::sqrt(c.cov.diagonal().maxCoeff()));
    return s;
  }

  /// I.i.d. draws; deterministic for a given seed and standard library.
  std::vector<Point> sample(std::size_t n, std::uint64_t seed) const {
    if (n == 0) throw InputError("GaussianMixture::sample: n must be at least 1");
    std::mt19937_64 rng(seed);
    std::vector<double> w;
    w.reserve(components_.size());
    for (const auto& c : components_) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t i = pick(rng);
      Point z(dim_);
      for (int j = 0; j < dim_; ++j) z(j) = normal(rng);
      out.push_back(components_[i].mean + cache_[i].chol * z);
    }
    return out;
  }

  /// Components whose generated sample falls in each draw (same RNG stream as
  /// `sample`); used to check component frequencies.
  std::vector<std::size_t> sample_labels(std::size_t n, std::uint64_t seed) const {
    if (n == 0) throw InputError("GaussianMixture::sample_labels: n must be at least 1");
    std::mt19937_64 rng(seed);
    std::vector<double> w;
    for (const auto& c : components_) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      out.push_back(pick(rng));
      for (int j = 0; j < dim_; ++j) (void)normal(rng);
    }
    return out;
  }

  double component_value(std::size_t i, const Point& x) const {
    const Point z = x - components_[i].mean;
    return std::exp(cache_[i].log_coef - 0.5 * z.dot(cache_[i].precision * z));
  }

private:
  struct Cached {
    Matrix precision;
    Matrix chol;
    double log_coef = 0.0;
  };

  std::vector<GaussianComponent> components_;
  std::vector<Cached> cache_;
  int dim_ = 0;
};

// ---------------------------------------------------------------------------
// JSON: {"dim": d, "components": [{"weight": w, "mean": [...], "cov": [[...]]}]}

inline GaussianMixture mixture_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& where, const std::string& what) -> void {
    throw InputError("mixture spec: " + where + ": " + what);
  };
  if (!j.is_object()) fail("<root>", "expected an object");
  if (!j.contains("dim") || !j["dim"].is_number_integer()) fail("dim", "expected a positive integer");
  const int d = j["dim"].get<int>();
  if (d < 1) fail("dim", "expected a positive integer");
  if (!j.contains("components") || !j["components"].is_array() || j["components"].empty()) {
    fail("components", "expected a non-empty array");
  }
  std::vector<GaussianComponent> comps;
  std::size_t idx = 0;
  for (const auto& c : j["components"]) {
    const std::string at = "components[" + std::to_string(idx++) + "]";
    if (!c.is_object()) fail(at, "expected an object");
    GaussianComponent gc;
    if (!c.contains("weight") || !c["weight"].is_number()) fail(at + ".weight", "expected a number");
    gc.weight = c["weight"].get<double>();
    if (!c.contains("mean") || !c["mean"].is_array() || static_cast<int>(c["mean"].size()) != d) {
      fail(at + ".mean", "expected an array of length dim");
    }
    gc.mean.resize(d);
    for (int i = 0; i < d; ++i) {
      if (!c["mean"][i].is_number()) fail(at + ".mean", "expected numbers");
      gc.mean(i) = c["mean"][i].get<double>();
    }
    if (!c.contains("cov") || !c["cov"].is_array() || static_cast<int>(c["cov"].size()) != d) {
      fail(at + ".cov", "expected a dim x dim array");
    }
    gc.cov.resize(d, d);
    for (int r = 0; r < d; ++r) {
      const auto& row = c["cov"][r];
      if (!row.is_array() || static_cast<int>(row.size()) != d) fail(at + ".cov", "expected a dim x dim array");
      for (int col = 0; col < d; ++col) {
        if (!row[col].is_number()) fail(at + ".cov", "expected numbers");
        gc.cov(r, col) = row[col].get<double>();
      }
    }
    comps.push_back(std::move(gc));
  }
  return GaussianMixture(std::move(comps));
}

inline nlohmann::json mixture_to_json(const GaussianMixture& m) {
  nlohmann::json j;
  j["dim"] = m.dim();
  j["components"] = nlohmann::json::array();
  for (const auto& c : m.components()) {
    nlohmann::json jc;
    jc["weight"] = c.weight;
    jc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    nlohmann::json cov = nlohmann::json::array();
    for (int r = 0; r < m.dim(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.dim()));
      for (int col = 0; col < m.dim(); ++col) row[static_cast<std::size_t>(col)] = c.cov(r, col);
      cov.push_back(row);
    }
    jc["cov"] = cov;
    j["components"].push_back(jc);
  }
  return j;
}

inline GaussianMixture load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mixture file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("mixture file '" + path + "': " + e.what());
  }
  return mixture_from_json(j);
}

/// Two-dimensional three-mode mixture used by the reference experiments.
inline GaussianMixture reference_mixture_2d() {
  std::vector<GaussianComponent> c(3);
  c[0] = {0.40, Point{{-1.5, 0.0}}, Matrix{{0.30, 0.05}, {0.05, 0.25}}};
  c[1] = {0.35, Point{{1.5, 0.2}}, Matrix{{0.25, -0.04}, {-0.04, 0.30}}};
  c[2] = {0.25, Point{{0.0, 2.2}}, Matrix{{0.22, 0.0}, {0.0, 0.22}}};
  return GaussianMixture(std::move(c));
}

/// 0.5 N(-2, 1) + 0.5 N(2, 1) on the real line.
inline GaussianMixture bimodal_1d(double half_gap = 2.0) {
  std::vector<GaussianComponent> c(2);
  c[0] = {0.5, Point::Constant(1, -half_gap), Matrix::Identity(1, 1)};
  c[1] = {0.5, Point::Constant(1, half_gap), Matrix::Identity(1, 1)};
  return GaussianMixture(std::move(c));
}

inline GaussianMixture standard_normal(int dim) {
  return GaussianMixture({GaussianComponent{1.0, Point::Zero(dim), Matrix::Identity(dim, dim)}});
}

}  // namespace hillclimb
