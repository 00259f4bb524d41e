#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "hillclimb/density.hpp"
#include "hillclimb/flow.hpp"
#include "hillclimb/gaussian_mixture.hpp"
#include "hillclimb/shift.hpp"

using namespace hillclimb;

namespace {

Point p1(double x) { return Point::Constant(1, x); }
double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// f(x) = a.x + b
struct Affine {
  Point a;
  double b;
  int dim() const { return static_cast<int>(a.size()); }
  double value(const Point& x) const { return a.dot(x) + b; }
  Point gradient(const Point&) const { return a; }
  Matrix hessian(const Point&) const { return Matrix::Zero(dim(), dim()); }
};

// f(x) = -(x - top)^2 in 1-D
struct Parabola {
  double top;
  int dim() const { return 1; }
  double value(const Point& x) const { return -(x(0) - top) * (x(0) - top); }
  Point gradient(const Point& x) const { return p1(-2.0 * (x(0) - top)); }
  Matrix hessian(const Point&) const { return Matrix::Constant(1, 1, -2.0); }
};

struct Reference {
  GaussianMixture m = reference_mixture_2d();
  ModeList modes = find_modes(m);
  SmoothnessBounds bounds = estimate_bounds(m);
  FlowConfig flow = FlowConfig::for_model(bounds, modes, m.bounding_box(5.0));
  Box box = m.bounding_box(2.5);
};

const Reference& ref() {
  static const Reference r;
  return r;
}

std::vector<Point> random_starts(int n, std::uint64_t seed) {
  const auto& r = ref();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(r.box.lo(0), r.box.hi(0)), uy(r.box.lo(1), r.box.hi(1));
  std::vector<Point> out;
  // level floor as in the harness: far-tail starts crawl at tiny gradients
  const double floor = 0.01 * r.modes.max_value();
  while (static_cast<int>(out.size()) < n) {
    const Point x{{ux(rng), uy(rng)}};
    if (r.m.value(x) >= floor) out.push_back(x);
  }
  return out;
}

// Fraction of in-basin starts whose endpoint lies within tol of the oracle mode.
template <typename Run>
double oracle_agreement(const std::vector<Point>& starts, double tol, Run&& run) {
  const auto& r = ref();
  int used = 0, good = 0;
  for (const auto& x0 : starts) {
    const auto a = assign_basin(r.m, x0, r.modes, r.flow);
    if (!a.resolved()) continue;
    ++used;
    const Trajectory t = run(x0);
    good += (t.endpoint() - r.modes.modes[a.mode]).norm() <= tol ? 1 : 0;
  }
  return used ? static_cast<double>(good) / used : 0.0;
}

}  // namespace

TEST(EulerShift, ClosedFormFirstStep) {
  const auto m = standard_normal(1);
  ShiftConfig c;
  c.step = 0.1;
  c.stop.max_iters = 1;
  const auto t = euler_shift(m, p1(-1.0), c);
  ASSERT_EQ(t.num_steps(), 1u);
  EXPECT_NEAR(t.points[1](0), -1.0 + 0.1 * phi(1.0), 1e-15);
  EXPECT_NEAR(t.points[1](0), -0.9758029, 1e-7);
}

TEST(EulerShift, ModeIsFixedPoint) {
  const auto t = euler_shift(standard_normal(2), Point::Zero(2), ShiftConfig{});
  EXPECT_EQ(t.num_steps(), 0u);
  EXPECT_EQ(t.terminal.kind, TerminalKind::converged);
}

TEST(EulerShift, OracleAgreement) {
  const auto& r = ref();
  const auto c = ShiftConfig::for_model(r.bounds, 0.01);
  const double agree = oracle_agreement(random_starts(200, 1), 1e-3, [&](const Point& x) { return euler_shift(r.m, x, c); });
  EXPECT_GE(agree, 0.99);
}

TEST(EulerVariant, ConstantPhiIsBitIdentical) {
  const auto& r = ref();
  ShiftConfig c = ShiftConfig::for_model(r.bounds, 0.05);
  const Point x0{{0.4, -0.9}};
  const auto a = euler_shift(r.m, x0, c);
  c.phi = [](double) { return 1.0; };
  const auto b = euler_shift_variant(r.m, x0, c);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_EQ(a.points[k], b.points[k]);
}

TEST(EulerVariant, LogDensityStep) {
  ShiftConfig c;
  c.step = 0.05;
  c.stop.max_iters = 1;
  c.phi = [](double f) { return 1.0 / f; };
  const auto t = euler_shift_variant(standard_normal(1), p1(-1.0), c);
  EXPECT_NEAR(t.points[1](0), -0.95, 1e-15);
}

TEST(EulerVariant, SingularPhiAtZeroDensity) {
  const Affine flat{p1(0.0), 0.0};
  ShiftConfig c;
  c.phi = [](double f) { return 1.0 / f; };
  EXPECT_THROW(euler_shift_variant(flat, p1(1.0), c), IntegrationError);
}

TEST(EulerVariant, OracleAgreement) {
  const auto& r = ref();
  ShiftConfig c = ShiftConfig::for_model(r.bounds, 0.01);
  c.phi = [](double f) { return 1.0 / f; };
  // (kappa2/2) rho phi(f) <= 1 holds wherever f >= kappa2 rho / 2
  const double agree =
      oracle_agreement(random_starts(200, 2), 1e-3, [&](const Point& x) { return euler_shift_variant(r.m, x, c); });
  EXPECT_GE(agree, 0.99);
}

TEST(LevelShift, AffineGainsExactlyRho) {
  const Affine f{Point{{0.3, -0.4}}, 1.0};
  ShiftConfig c;
  c.step = 0.01;
  c.grad_guard = 0.1;
  c.stop.max_iters = 25;
  const auto t = level_shift(f, Point{{0.0, 0.0}}, c);
  ASSERT_EQ(t.num_steps(), 25u);
  for (std::size_t k = 1; k < t.f_values.size(); ++k) EXPECT_NEAR(t.f_values[k] - t.f_values[k - 1], 0.01, 1e-15);
}

TEST(LevelShift, FollowsLevelsOnStandardNormal) {
  const auto m = standard_normal(1);
  ShiftConfig c;
  c.step = 0.01;
  c.grad_guard = 0.05;
  const auto t = level_shift(m, p1(-2.0), c);
  ASSERT_GE(t.num_steps(), 10u);
  for (int k = 1; k <= 10; ++k) {
    EXPECT_NEAR(t.f_values[k] - t.f_values[0], k * c.step, 0.1 * k * c.step) << k;
  }
  EXPECT_EQ(t.terminal.kind, TerminalKind::stalled);
  const double kappa2 = phi(0.0);
  EXPECT_LE(std::abs(m.gradient(t.endpoint())(0)), 0.05 + c.step * kappa2 / 0.05);
  EXPECT_THROW(level_shift(m, p1(-2.0), ShiftConfig{}), InputError);  // no guard set
}

TEST(LineSearch, QuadraticShimInteriorMaximum) {
  // along x = 2r the maximum of -(x - 1)^2 is at r = 0.5, inside [0, 0.7]
  const Parabola f{1.0};
  const Point x0 = p1(0.0);
  const double r = line_search_step(f, x0, f.value(x0), f.gradient(x0), 0.7);
  EXPECT_NEAR(r, 0.5, 1e-10 * 0.7 + 1e-12);
  // boundary maximum when the peak lies beyond rho
  EXPECT_EQ(line_search_step(f, x0, f.value(x0), f.gradient(x0), 0.3), 0.3);
}

TEST(LineSearch, ModeStays) {
  const auto t = line_search_shift(standard_normal(1), p1(0.0), ShiftConfig{});
  EXPECT_EQ(t.num_steps(), 0u);
}

TEST(LineSearch, StrictlyIncreasingAndAgrees) {
  const auto& r = ref();
  const auto c = ShiftConfig::for_model(r.bounds, 0.05);
  const auto starts = random_starts(100, 3);
  for (const auto& x0 : starts) {
    const auto t = line_search_shift(r.m, x0, c);
    for (std::size_t k = 1; k < t.f_values.size(); ++k) EXPECT_GT(t.f_values[k], t.f_values[k - 1]);
  }
  EXPECT_GE(oracle_agreement(starts, 1e-3, [&](const Point& x) { return line_search_shift(r.m, x, c); }), 0.99);
}

TEST(MaxShift, MonotoneBallBoundary) {
  ShiftConfig c;
  c.step = 0.5;
  c.stop.max_iters = 1;
  const auto t = max_shift(standard_normal(1), p1(-2.0), c);
  ASSERT_EQ(t.num_steps(), 1u);
  EXPECT_NEAR(t.points[1](0), -1.5, 1e-12);
}

TEST(MaxShift, ReachesModeOfStandardNormal) {
  const auto m = standard_normal(1);
  const auto t = max_shift(m, p1(-2.0), ShiftConfig::for_model(estimate_bounds(m), 0.5));
  EXPECT_LT(std::abs(t.endpoint()(0)), 1e-6);
  EXPECT_EQ(t.terminal.kind, TerminalKind::converged);
}

TEST(MaxShift, ModeStopsImmediately) {
  const auto& r = ref();
  const auto t = max_shift(r.m, r.modes.modes[0], ShiftConfig::for_model(r.bounds, 0.05));
  EXPECT_EQ(t.num_steps(), 0u);
}

TEST(MaxShift, AgreementImprovesAsEpsilonShrinks) {
  const auto& r = ref();
  const auto starts = random_starts(150, 4);
  double prev = 0.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    const auto c = ShiftConfig::for_model(r.bounds, eps);
    const double a = oracle_agreement(starts, 0.25 * r.modes.min_separation, [&](const Point& x) { return max_shift(r.m, x, c); });
    EXPECT_GE(a, prev) << eps;
    prev = a;
  }
  EXPECT_GE(prev, 0.99);
}

TEST(MaxSlopeShift, UnregularizedStopsAtInflection) {
  const auto m = standard_normal(1);
  ShiftConfig c = ShiftConfig::for_model(estimate_bounds(m), 0.5);
  c.unregularized = true;
  const auto t = max_slope_shift(m, p1(-3.0), c);
  EXPECT_EQ(t.terminal.kind, TerminalKind::converged);
  EXPECT_LT(t.num_steps(), 1000u);
  EXPECT_NEAR(t.endpoint()(0), -1.0, 1e-6);
}

TEST(MaxSlopeShift, RegularizedReachesMode) {
  const auto m = standard_normal(1);
  ShiftConfig c = ShiftConfig::for_model(estimate_bounds(m), 0.5);
  c.slope_fraction = 0.5;
  const auto t = max_slope_shift(m, p1(-3.0), c);
  EXPECT_LT(std::abs(t.endpoint()(0)), 1e-3);
}

TEST(MaxSlopeShift, AnnulusStepOnConvexAndConcaveStretches) {
  const auto m = standard_normal(1);
  ShiftConfig c;
  c.step = 0.5;
  c.slope_fraction = 0.5;
  c.stop.max_iters = 1;
  // f convex increasing on [-3, -2.5]: difference quotient grows with radius
  auto t = max_slope_shift(m, p1(-3.0), c);
  ASSERT_EQ(t.num_steps(), 1u);
  EXPECT_NEAR(t.step_lengths[0], 0.5, 1e-9);
  // f concave increasing on [-0.5, -0.3]: the quotient shrinks, inner radius wins
  c.step = 0.2;
  t = max_slope_shift(m, p1(-0.5), c);
  ASSERT_EQ(t.num_steps(), 1u);
  EXPECT_NEAR(t.step_lengths[0], 0.1, 1e-9);
}

TEST(MaxSlopeShift, StepLengthsInAnnulus) {
  const auto& r = ref();
  const auto c = ShiftConfig::for_model(r.bounds, 0.05);
  for (const auto& x0 : random_starts(60, 5)) {
    const auto t = max_slope_shift(r.m, x0, c);
    const auto rep = step_diagnostics(t, r.m, DiagnosticsConfig::from(ShiftKind::max_slope_shift, c, r.bounds));
    EXPECT_EQ(rep.total(), 0);
    for (std::size_t k = 0; k + 1 < t.num_steps(); ++k) {
      EXPECT_GE(t.step_lengths[k], 0.5 * 0.05 * (1 - 1e-12));
      EXPECT_LE(t.step_lengths[k], 0.05 * (1 + 1e-12));
    }
  }
}

TEST(ShiftConfig, Validation) {
  ShiftConfig c;
  c.step = 0.0;
  EXPECT_THROW(max_shift(standard_normal(1), p1(0.0), c), InputError);
  c.step = 0.1;
  c.slope_fraction = 1.0;
  EXPECT_THROW(max_slope_shift(standard_normal(1), p1(0.0), c), InputError);
  c.slope_fraction = 0.5;
  c.stop.max_iters = 0;
  EXPECT_THROW(euler_shift(standard_normal(1), p1(0.0), c), InputError);
}

TEST(MeanShift, SinglePointConvergesInOneStep) {
  const Point p{{0.3, -0.2}};
  for (const auto& prof : {KernelProfile::flat(), KernelProfile::triweight()}) {
    const Kde kde({p}, 1.0, prof);
    const auto t = mean_shift(kde, Point{{0.7, 0.3}});
    ASSERT_GE(t.num_steps(), 1u);
    EXPECT_LT((t.points[1] - p).norm(), 1e-15);
    EXPECT_LE(t.num_steps(), 2u);
    EXPECT_EQ(t.terminal.kind, TerminalKind::converged);
  }
}

TEST(MeanShift, SymmetricFixedPointAndIsolatedStart) {
  const Kde kde({p1(-1.0), p1(1.0)}, 3.0);
  const auto t = mean_shift(kde, p1(0.0));
  EXPECT_EQ(t.num_steps(), 0u);
  EXPECT_EQ(t.terminal.kind, TerminalKind::converged);
  const auto far = mean_shift(kde, p1(10.0));
  EXPECT_EQ(far.terminal.kind, TerminalKind::stalled);
}

TEST(MeanShift, ShadowMonotoneAndAligned) {
  const auto& r = ref();
  const Kde kde = Kde::with_rule(r.m.sample(2000, 11), "scott_kernel");
  const ShadowKde L = make_shadow(kde);
  const auto bounds = estimate_bounds(L.kde, r.m.bounding_box(3.0), 61);
  DiagnosticsConfig d;
  d.kind = ShiftKind::mean_shift;
  d.step = L.step();
  d.bounds = bounds;
  d.bandwidth = kde.bandwidth();
  for (const auto& x0 : random_starts(40, 6)) {
    if (kde.window_count(x0) == 0) continue;
    const auto t = mean_shift(kde, L, x0);
    ASSERT_TRUE(t.consistent());
    EXPECT_EQ(step_diagnostics(t, L.kde, d).total(), 0);
  }
}

TEST(Diagnostics, EulerCosinesAreOne) {
  const auto& r = ref();
  const auto c = ShiftConfig::for_model(r.bounds, 0.05);
  for (const auto& x0 : random_starts(20, 7)) {
    const auto t = euler_shift(r.m, x0, c);
    for (double cs : t.align_cosines) EXPECT_NEAR(cs, 1.0, 1e-12);
    EXPECT_EQ(step_diagnostics(t, r.m, DiagnosticsConfig::from(ShiftKind::euler, c, r.bounds)).total(), 0);
  }
}

TEST(Diagnostics, MaxShiftStepLengths) {
  const auto& r = ref();
  const auto c = ShiftConfig::for_model(r.bounds, 0.05);
  const auto dc = DiagnosticsConfig::from(ShiftKind::max_shift, c, r.bounds);
  for (const auto& x0 : random_starts(60, 8)) {
    const auto t = max_shift(r.m, x0, c);
    for (std::size_t k = 0; k + 1 < t.num_steps(); ++k) {
      EXPECT_GE(t.step_lengths[k], 0.05 - dc.inner_tol);
      EXPECT_LE(t.step_lengths[k], 0.05 * (1 + 1e-12));
    }
    for (std::size_t k = 1; k < t.f_values.size(); ++k) EXPECT_GE(t.f_values[k], t.f_values[k - 1]);
    EXPECT_EQ(step_diagnostics(t, r.m, dc).total(), 0);
  }
}

TEST(Diagnostics, FlagsBrokenTrajectories) {
  const auto m = standard_normal(1);
  Trajectory t;
  t.start(p1(-1.0), m.value(p1(-1.0)));
  t.push(p1(-1.5), m.value(p1(-1.5)), -1.0);  // downhill, against the gradient
  t.push(p1(-1.45), m.value(p1(-1.45)), 1.0);
  DiagnosticsConfig d;
  d.kind = ShiftKind::max_shift;
  d.step = 0.5;
  d.bounds = estimate_bounds(m);
  const auto rep = step_diagnostics(t, m, d);
  EXPECT_EQ(rep.violations_monotone, 1);
  EXPECT_EQ(rep.violations_angle, 1);
  EXPECT_EQ(rep.violations_steplaw, 0);  // first step is length eps; the last is exempt
  EXPECT_EQ(rep.monotone[0], 0);
}

TEST(Determinism, RepeatedRunsAreBitIdentical) {
  const auto& r = ref();
  const auto c = ShiftConfig::for_model(r.bounds, 0.1);
  const Point x0{{-0.3, 0.8}};
  for (int alg = 0; alg < 4; ++alg) {
    auto run = [&] {
      switch (alg) {
        case 0: return euler_shift(r.m, x0, c);
        case 1: return line_search_shift(r.m, x0, c);
        case 2: return max_shift(r.m, x0, c);
        default: return max_slope_shift(r.m, x0, c);
      }
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_EQ(a.points[k], b.points[k]);
  }
}

TEST(TrajectoryCsv, Format) {
  Trajectory t;
  t.start(p1(0.5), 0.25);
  t.push(p1(1.0), 0.5, 1.0);
  t.terminal = {TerminalKind::converged, -1};
  std::ostringstream out;
  write_trajectory_csv(out, t);
  EXPECT_EQ(out.str(), "iteration,x0,f,step_length,align_cosine,status\n0,0.5,0.25,,,\n1,1,0.5,0.5,1,converged\n");
}
