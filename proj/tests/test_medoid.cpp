#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hillclimb/density.hpp"
#include "hillclimb/flow.hpp"
#include "hillclimb/gaussian_mixture.hpp"
#include "hillclimb/medoid.hpp"

using namespace hillclimb;

namespace {

Point p1(double x) { return Point::Constant(1, x); }
double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

MedoidSet three_points() { return MedoidSet::from_model({p1(0.0), p1(0.4), p1(0.9)}, standard_normal(1)); }

MedoidSet grid_1d(const GaussianMixture& m, double lo, double hi, double g) {
  std::vector<Point> pts;
  const int n = static_cast<int>(std::round((hi - lo) / g));
  for (int i = 0; i <= n; ++i) pts.push_back(p1(lo + i * g));
  return MedoidSet::from_model(std::move(pts), m, g);
}

// Ring of n sites with hop-count distance. Exposes only what MetricSpace requires.
struct Ring {
  using Query = std::size_t;
  std::vector<double> f;

  std::size_t size() const { return f.size(); }
  double value(std::size_t i) const { return f[i]; }
  double distance(Query q, std::size_t i) const {
    const std::size_t a = q > i ? q - i : i - q;
    return static_cast<double>(std::min(a, f.size() - a));
  }
  std::vector<std::size_t> ball(Query q, double r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (distance(q, i) <= r) out.push_back(i);
    }
    return out;
  }
  Query query_of(std::size_t i) const { return i; }
  double query_value(Query q) const { return f[q]; }
};

static_assert(MetricSpace<MedoidSet>);
static_assert(MetricSpace<Ring>);

}  // namespace

TEST(MedoidSet, ValuesMatchModel) {
  const auto m = reference_mixture_2d();
  const auto pts = m.sample(300, 4);
  const auto Y = MedoidSet::from_model(pts, m);
  for (std::size_t i = 0; i < Y.size(); ++i) EXPECT_EQ(Y.value(i), m.value(pts[i]));
  EXPECT_THROW(MedoidSet({}, [](const Point&) { return 0.0; }), InputError);
}

TEST(MedoidMaxShift, ThreePointExample) {
  const auto Y = three_points();
  const auto p = medoid_max_shift(Y, p1(0.9), 0.5);
  EXPECT_EQ(p.indices, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(p.terminal.kind, TerminalKind::converged);
  EXPECT_NEAR(p.f_values.back(), phi(0.0), 1e-15);
}

TEST(MedoidMaxShift, SingletonStopsThere) {
  const auto Y = MedoidSet::from_model({p1(0.7)}, standard_normal(1));
  const auto p = medoid_max_shift(Y, p1(0.7), 0.3);
  EXPECT_TRUE(p.at_start());
  EXPECT_EQ(p.terminal.kind, TerminalKind::converged);
  // a start outside Y snaps onto it
  const auto q = medoid_max_shift(Y, p1(0.6), 0.3);
  EXPECT_EQ(q.indices, (std::vector<std::size_t>{0}));
}

TEST(MedoidMaxShift, EmptyBallStalls) {
  const auto Y = three_points();
  const auto p = medoid_max_shift(Y, p1(5.0), 0.5);
  EXPECT_EQ(p.terminal.kind, TerminalKind::stalled);
  EXPECT_TRUE(p.at_start());
  EXPECT_THROW(medoid_max_shift(Y, p1(0.0), 0.0), InputError);
}

TEST(MedoidMaxShift, BimodalGridGuarantees) {
  const auto m = bimodal_1d();
  const auto modes = find_modes(m);
  const auto bounds = estimate_bounds(m);
  const FlowConfig flow = FlowConfig::for_model(bounds, modes, m.bounding_box(5.0));
  const double g = 0.02, eps = 0.2;
  const auto Y = grid_1d(m, -6.0, 6.0, g);
  std::vector<Point> eval;
  for (int i = 0; i <= 12000; ++i) eval.push_back(p1(-6.0 + 0.001 * i));
  const double s = 0.5 * std::min(modes.values[0], modes.values[1]);
  const double alpha = covering_radius(Y, m, s, eval).alpha;
  EXPECT_LE(alpha, 0.5 * g + 1e-12);
  // distance bound from the gradient bound via the curvature at the modes
  double lambda = std::numeric_limits<double>::infinity();
  for (double ev : modes.max_hessian_eigenvalues) lambda = std::min(lambda, -ev);
  const double C = bounds.kappa2 / lambda;
  for (std::size_t i = 0; i < Y.size(); i += 7) {
    const Point x0 = Y.point(i);
    const auto a = assign_basin(m, x0, modes, flow);
    const auto p = medoid_max_shift(Y, x0, eps);
    ASSERT_EQ(p.terminal.kind, TerminalKind::converged);
    const auto r = medoid_diagnostics(Y, p, eps, false);
    EXPECT_TRUE(r.endpoint_certified);
    EXPECT_EQ(r.violations_monotone, 0);
    EXPECT_EQ(r.violations_alternating, 0);
    const Point end = endpoint(Y, p);
    EXPECT_LE(std::abs(m.gradient(end)(0)), 2.0 * bounds.kappa1 * alpha / eps + bounds.kappa2 * eps / 2.0);
    if (a.resolved()) {
      EXPECT_LE((end - modes.modes[a.mode]).norm(), C * (alpha / eps + eps)) << x0(0);
    }
  }
}

TEST(MedoidMaxSlopeShift, ThreePointExample) {
  const auto Y = three_points();
  EXPECT_GT((phi(0.4) - phi(0.9)) / 0.5, (phi(0.0) - phi(0.9)) / 0.9);
  const auto p = medoid_max_slope_shift(Y, p1(0.9), 1.0);
  ASSERT_GE(p.num_steps(), 1u);
  EXPECT_EQ(p.indices[0], 1u);
  EXPECT_EQ(endpoint(Y, p)(0), 0.0);
  // at the top: nothing improves
  EXPECT_TRUE(medoid_max_slope_shift(Y, p1(0.0), 1.0).at_start());
}

TEST(MedoidMaxSlopeShift, AgreesWithMaxShiftOnDenseGrid) {
  const auto m = bimodal_1d();
  const auto modes = find_modes(m);
  const auto Y = grid_1d(m, -6.0, 6.0, 0.02);
  int same = 0, total = 0;
  for (std::size_t i = 0; i < Y.size(); i += 3) {
    const Point x0 = Y.point(i);
    const int a = modes.nearest_within(endpoint(Y, medoid_max_shift(Y, x0, 0.2)), 10.0);
    const int b = modes.nearest_within(endpoint(Y, medoid_max_slope_shift(Y, x0, 0.2)), 10.0);
    same += a == b ? 1 : 0;
    ++total;
  }
  EXPECT_GE(same, 0.95 * total);
}

TEST(QuickShift, ThreePointExample) {
  const auto Y = three_points();
  const auto p = quick_shift(Y, p1(0.9), 1.0);
  EXPECT_EQ(p.indices, (std::vector<std::size_t>{1, 0}));
  EXPECT_TRUE(quick_shift(Y, p1(0.0), 1.0).at_start());
}

TEST(QuickShift, DistanceTieGoesToSmallestIndex) {
  // f(-1) == f(1) exactly under the symmetric bimodal mixture, both above f(0)
  const auto m = bimodal_1d(1.5);
  const auto Y = MedoidSet::from_model({p1(-1.0), p1(1.0), p1(0.0)}, m);
  ASSERT_EQ(Y.value(0), Y.value(1));
  ASSERT_GT(Y.value(0), Y.value(2));
  for (int run = 0; run < 3; ++run) {
    const auto p = quick_shift(Y, p1(0.0), 1.5);
    ASSERT_EQ(p.num_steps(), 1u);
    EXPECT_EQ(p.indices[0], 0u);
  }
  // the same holds for the max shift argmax tie
  EXPECT_EQ(medoid_max_shift(Y, p1(0.0), 1.5).indices.front(), 0u);
}

TEST(MedoidShift, ThreePointCentroid) {
  const auto Y = MedoidSet::from_model({p1(0.0), p1(1.0), p1(2.0)}, standard_normal(1));
  for (auto form : {MedoidShiftForm::anchored, MedoidShiftForm::printed}) {
    const auto p = medoid_shift(Y, p1(0.0), 10.0, KernelProfile::flat(), form);
    EXPECT_EQ(p.indices, (std::vector<std::size_t>{1}));
    EXPECT_EQ(p.terminal.kind, TerminalKind::converged);
  }
}

TEST(MedoidShift, SingletonAndSymmetry) {
  const auto single = MedoidSet::from_model({p1(0.3)}, standard_normal(1));
  const auto p = medoid_shift(single, p1(0.5), 1.0, KernelProfile::triweight());
  EXPECT_EQ(endpoint(single, p)(0), 0.3);
  EXPECT_EQ(p.terminal.kind, TerminalKind::converged);
  // symmetric Y, start at the centre: the argmin is the medoid at 0
  const auto Y = MedoidSet::from_model({p1(-2.0), p1(-1.0), p1(0.0), p1(1.0), p1(2.0)}, standard_normal(1));
  const auto q = medoid_shift(Y, p1(0.0), 1.5, KernelProfile::triweight());
  EXPECT_EQ(endpoint(Y, q)(0), 0.0);
  // isolated start
  EXPECT_EQ(medoid_shift(single, p1(5.0), 1.0, KernelProfile::triweight()).terminal.kind, TerminalKind::stalled);
}

TEST(MedoidShift, FormsDiffer) {
  // printed weights ignore the current point, so every start reaches the same medoid
  const auto m = bimodal_1d();
  const auto Y = grid_1d(m, -4.0, 4.0, 0.5);
  const auto left = medoid_shift(Y, p1(-3.0), 1.0, KernelProfile::triweight(), MedoidShiftForm::printed);
  const auto right = medoid_shift(Y, p1(3.0), 1.0, KernelProfile::triweight(), MedoidShiftForm::printed);
  EXPECT_EQ(endpoint(Y, left), endpoint(Y, right));
  const auto aleft = medoid_shift(Y, p1(-3.0), 1.0, KernelProfile::triweight());
  const auto aright = medoid_shift(Y, p1(3.0), 1.0, KernelProfile::triweight());
  EXPECT_LT(endpoint(Y, aleft)(0), 0.0);
  EXPECT_GT(endpoint(Y, aright)(0), 0.0);
}

TEST(CoveringRadius, SelfCoverAndGridBound) {
  const auto m = reference_mixture_2d();
  const Box box = m.bounding_box(3.0);
  const auto grid = make_grid(box, 41);
  const double s = 0.01;
  const auto self = MedoidSet::from_model(grid, m);
  EXPECT_EQ(covering_radius(self, m, s, grid).alpha, 0.0);
  const auto coarse = make_grid(box, 11);
  const double g = (box.hi - box.lo).maxCoeff() / 10.0;
  const auto Y = MedoidSet::from_model(coarse, m);
  EXPECT_LE(covering_radius(Y, m, s, grid).alpha, g * std::sqrt(2.0) / 2.0 + 1e-12);
  EXPECT_THROW(covering_radius(Y, m, 10.0, grid), InputError);
}

TEST(CoveringRadius, DoublingSampleDoesNotIncreaseAlpha) {
  const auto m = reference_mixture_2d();
  const auto modes = find_modes(m);
  double lowest = modes.values[0];
  for (double v : modes.values) lowest = std::min(lowest, v);
  const auto grid = make_grid(m.bounding_box(5.0), 121);
  const auto big = m.sample(4000, 77);
  const std::vector<Point> half(big.begin(), big.begin() + 2000);
  const double a2000 = covering_radius(MedoidSet::from_model(half, m), m, 0.5 * lowest, grid).alpha;
  const double a4000 = covering_radius(MedoidSet::from_model(big, m), m, 0.5 * lowest, grid).alpha;
  EXPECT_GT(a2000, 0.0);
  EXPECT_LE(a4000, a2000);
  // nested upper level sets: alpha is nonincreasing in s
  const auto Y = MedoidSet::from_model(half, m);
  EXPECT_LE(covering_radius(Y, m, lowest, grid).alpha, covering_radius(Y, m, 0.5 * lowest, grid).alpha);
}

TEST(RadiusQuery, EdgeCasesAndBruteForce) {
  const auto Y = three_points();
  EXPECT_TRUE(radius_query(Y, p1(0.2), 0.0).empty());
  EXPECT_EQ(radius_query(Y, p1(0.4), 0.0), (std::vector<std::size_t>{1}));
  EXPECT_EQ(radius_query(Y, p1(0.0), 0.9), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(radius_query(Y, p1(0.0), -1.0), InputError);
  std::mt19937_64 rng(8);
  for (int d = 1; d <= 3; ++d) {
    const auto pts = standard_normal(d).sample(400, 50 + d);
    const auto S = MedoidSet::from_model(pts, standard_normal(d));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
      Point x(d);
      for (int j = 0; j < d; ++j) x(j) = nd(rng);
      const double r = 0.05 * t;
      std::vector<std::size_t> brute;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if ((pts[i] - x).norm() <= r) brute.push_back(i);
      }
      EXPECT_EQ(radius_query(S, x, r), brute);
    }
  }
}

TEST(MetricOnly, RingSpace) {
  // one peak at site 3, another at site 9
  Ring ring;
  for (std::size_t i = 0; i < 12; ++i) {
    const double a = std::min<double>(std::abs(static_cast<double>(i) - 3.0), 12.0 - std::abs(static_cast<double>(i) - 3.0));
    const double b = std::min<double>(std::abs(static_cast<double>(i) - 9.0), 12.0 - std::abs(static_cast<double>(i) - 9.0));
    ring.f.push_back(std::max(5.0 - a, 4.0 - b));
  }
  const auto p = medoid_max_shift(ring, std::size_t{0}, 1.0);
  EXPECT_EQ(endpoint(ring, p), 3u);
  EXPECT_EQ(endpoint(ring, medoid_max_shift(ring, std::size_t{7}, 1.0)), 9u);
  EXPECT_EQ(endpoint(ring, quick_shift(ring, std::size_t{11}, 2.0)), 9u);
  EXPECT_EQ(endpoint(ring, medoid_max_slope_shift(ring, std::size_t{8}, 1.0)), 9u);
  const auto r = medoid_diagnostics(ring, p, 1.0, false);
  EXPECT_TRUE(r.endpoint_certified);
}

TEST(MedoidAlgorithms, FiniteTermination) {
  const auto m = reference_mixture_2d();
  const auto Y = MedoidSet::from_model(m.sample(500, 3), m);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    const Point x0{{u(rng), u(rng)}};
    for (double eps : {0.3, 1.0, 10.0}) {
      const auto a = medoid_max_shift(Y, x0, eps);
      const auto b = medoid_max_slope_shift(Y, x0, eps);
      const auto c = quick_shift(Y, x0, eps);
      for (const auto* p : {&a, &b, &c}) {
        EXPECT_NE(p->terminal.kind, TerminalKind::max_iterations);
        EXPECT_LE(p->num_steps(), Y.size());
      }
      if (a.terminal.kind == TerminalKind::converged) {
        const auto r = medoid_diagnostics(Y, a, eps, !is_medoid(Y, x0));
        EXPECT_TRUE(r.endpoint_certified);
        EXPECT_EQ(r.violations_monotone, 0);
        EXPECT_EQ(r.violations_alternating, 0);
      }
    }
  }
}

TEST(MedoidAlgorithms, ToTrajectory) {
  const auto Y = three_points();
  const auto p = medoid_max_shift(Y, p1(0.9), 0.5);
  const auto t = to_trajectory(Y, p);
  EXPECT_TRUE(t.consistent());
  EXPECT_EQ(t.points.size(), 3u);
  EXPECT_NEAR(t.step_lengths[0], 0.5, 1e-15);
  EXPECT_NEAR(t.step_lengths[1], 0.4, 1e-15);
}
