#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qnest/capacity.hpp"

using namespace qnest;

namespace {

Real R(double x) { return Real(x, 128); }

IntervalSet random_set(std::mt19937_64& rng, int max_parts = 6) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double A = u(rng), B = u(rng);
  if (A > B) std::swap(A, B);
  if (B - A < 1e-3) B = A + 1.0;
  const int m = std::uniform_int_distribution<int>(1, max_parts)(rng);
  std::vector<double> pts;
  std::uniform_real_distribution<double> w(A, B);
  for (int i = 0; i < 2 * m; ++i) pts.push_back(w(rng));
  std::sort(pts.begin(), pts.end());
  std::vector<Interval> parts;
  for (int i = 0; i < m; ++i) parts.emplace_back(R(pts[2 * i]), R(pts[2 * i + 1]));
  return IntervalSet(Interval(R(A), R(B)), parts);
}

// |X| / |I| at 512 bits
Real measure_ratio(const IntervalSet& X) {
  Real s(512);
  for (const auto& p : X.parts) s += p.hi().with_precision(512) - p.lo().with_precision(512);
  return s / (X.ambient.hi().with_precision(512) - X.ambient.lo().with_precision(512));
}

}  // namespace

TEST(KOfGamma, BasicShape) {
  EXPECT_EQ(k_of_gamma(1.0), 1.0);
  double prev = 1.0;
  for (double g = 1.0; g < 5; g += 0.37) {
    EXPECT_GE(k_of_gamma(g), prev);
    prev = k_of_gamma(g);
  }
  EXPECT_THROW(k_of_gamma(0.99), Error);
}

TEST(KOfGamma, EndpointPowerLawNeedsOnlyKappa) {
  // x -> x^kappa on [0,1]: |J|/|I| ratios on a grid, compared with k = kappa
  for (double kappa : {1.5, 2.0, 4.0}) {
    for (int a = 0; a < 20; ++a) {
      for (int b = a + 1; b <= 20; ++b) {
        const double i0 = a / 20.0, i1 = b / 20.0;
        for (int c = a; c < b; ++c) {
          const double j0 = c / 20.0, j1 = (c + 1) / 20.0;
          const double r = (std::pow(j1, kappa) - std::pow(j0, kappa)) / (std::pow(i1, kappa) - std::pow(i0, kappa));
          const double t = (j1 - j0) / (i1 - i0);
          EXPECT_GE(r, std::pow(t, kappa) / kappa * (1 - 1e-12));
          EXPECT_LE(r, std::pow(kappa * t, 1 / kappa) * (1 + 1e-12));
        }
      }
    }
  }
}

TEST(Constants, Profiles) {
  const ExponentConstants p = ExponentConstants::practical();
  EXPECT_EQ(p.a, 0.5);
  EXPECT_EQ(p.b, 2.0);
  EXPECT_DOUBLE_EQ(p.a_tilde, 1 / p.b_tilde);
  for (int n = 1; n < 50; ++n) {
    EXPECT_GT(p.gamma_n(n), p.gamma_tilde_n(n));
    EXPECT_GT(p.gamma_tilde_n(n), p.gamma_n(n + 1));
  }
  const ExponentConstants f = ExponentConstants::faithful();
  EXPECT_TRUE(std::isinf(f.b));
  EXPECT_EQ(f.a, 0.0);
  EXPECT_DOUBLE_EQ(f.a_tilde * f.b_tilde, 1.0);
  EXPECT_GT(f.b_tilde, 1000.0 * std::pow(k_of_gamma(2 * f.gamma - 1), 1000));
  EXPECT_THROW(ExponentConstants::practical(0.5, 3.0), Error);
}

TEST(Capacity, TrivialCases) {
  const Interval I(R(0), R(1));
  const auto whole = capacity_bounds(IntervalSet(I, {I}), 3.0, 2);
  EXPECT_EQ(whole.lower, Real(1L, 128));
  EXPECT_EQ(whole.upper, Real(1L, 128));
  const auto none = capacity_bounds(IntervalSet(I, {}), 3.0, 2);
  EXPECT_TRUE(none.upper.is_zero());
  const IntervalSet X(I, {Interval(R(0.2), R(0.3))});
  const auto e0 = capacity_bounds(X, 3.0, 0);
  EXPECT_EQ(e0.upper, Real(1L, 128));
  EXPECT_LT(abs(e0.lower - R(0.3) + R(0.2)), pow2(-100, 128));
}

TEST(Capacity, CollapsesAtGammaOne) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const IntervalSet X = random_set(rng);
    const Real m = measure_ratio(X);
    const auto cb = capacity_bounds(X, 1.0, 3);
    EXPECT_LE(abs(cb.lower.with_precision(512) - m), pow2(-60, 512));
    EXPECT_LE(abs(cb.upper.with_precision(512) - m), pow2(-60, 512));
  }
}

TEST(Capacity, SandwichAndEffortMonotonicity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> g(1.0, 4.0);
  for (int t = 0; t < 300; ++t) {
    const IntervalSet X = random_set(rng);
    const double gamma = g(rng);
    Real prev_lo(0L, 128), prev_up(1L, 128);
    for (int e = 0; e <= 3; ++e) {
      const auto cb = capacity_bounds(X, gamma, e);
      EXPECT_LE(cb.lower, cb.upper);
      EXPECT_GE(cb.lower.sign(), 0);
      EXPECT_LE(cb.upper, Real(1L, 128));
      EXPECT_GE(cb.lower, prev_lo) << t << " effort " << e;
      EXPECT_LE(cb.upper, prev_up) << t << " effort " << e;
      prev_lo = cb.lower;
      prev_up = cb.upper;
    }
  }
}

TEST(Capacity, MonotoneInGammaAndInX) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const IntervalSet Y = random_set(rng);
    // X: shrink every part of Y
    std::vector<Interval> xs;
    for (const auto& p : Y.parts) xs.emplace_back(p.lo() + (p.hi() - p.lo()) / 4L, p.hi() - (p.hi() - p.lo()) / 3L);
    const IntervalSet X(Y.ambient, xs);
    const auto x2 = capacity_bounds(X, 2.0, 2), y2 = capacity_bounds(Y, 2.0, 2);
    EXPECT_LE(x2.lower, y2.lower);
    EXPECT_LE(x2.upper, y2.upper);
    const auto x3 = capacity_bounds(X, 3.0, 2);
    EXPECT_LE(x2.lower, x3.lower);
    EXPECT_LE(x2.lower, x3.upper);
  }
}

TEST(Capacity, LeftHalfAgainstDensePowerLawSweep) {
  const Interval I(R(0), R(1));
  const IntervalSet X(I, {Interval(R(0), R(0.5))});
  const double gamma = 4.0;
  // brute force over admissible power laws
  double best = 0;
  for (int i = 0; i <= 2000; ++i) {
    const double kappa = std::exp(std::log(gamma) * (2.0 * i / 2000 - 1));
    for (int j = 0; j <= 100; ++j) {
      const double t = j / 100.0;
      auto h = [&](double u) { return (u < t ? -1 : 1) * std::pow(std::fabs(u - t), kappa); };
      best = std::max(best, (h(0.5) - h(0)) / (h(1) - h(0)));
    }
  }
  Real prev(0L, 128);
  for (int e = 1; e <= 4; ++e) {
    const auto cb = capacity_bounds(X, gamma, e);
    EXPECT_GT(cb.lower.to_double(), 0.5);
    EXPECT_GE(cb.lower, prev);
    EXPECT_LT(cb.upper.to_double(), 1.0);
    EXPECT_GE(cb.upper.to_double(), best);
    EXPECT_LE(cb.lower.to_double(), best + 1e-12);
    if (e == 4) {
      EXPECT_GE(cb.lower.to_double(), best - 0.01);
    }
    prev = cb.lower;
  }
}

TEST(Capacity, EmittedMapsSatisfyHolderBound) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<QsTestMap> maps;
  for (double g : {1.05, 1.5, 2.0, 4.0, 16.0}) {
    for (double t : {0.0, 0.3, 0.5, 1.0}) {
      maps.push_back(QsTestMap::power_law(g, t, g));
      maps.push_back(QsTestMap::power_law(1 / g, t, g));
    }
    maps.push_back(QsTestMap::composite({0, 0.2, 0.7, 1}, {1, g, 1}, g));
  }
  for (const auto& h : maps) {
    const double k = k_of_gamma(h.gamma_budget);
    for (int i = 0; i < 1000; ++i) {
      double p[4] = {u(rng), u(rng), u(rng), u(rng)};
      std::sort(p, p + 4);
      if (p[3] - p[0] < 1e-6 || p[2] - p[1] < 1e-9) continue;
      const double r = h.ratio(p[0], p[3], p[1], p[2]);
      EXPECT_TRUE(QsTestMap::holder_ok(k, (p[2] - p[1]) / (p[3] - p[0]), r)) << h.descriptor();
    }
  }
  EXPECT_THROW(QsTestMap::power_law(3.0, 0.5, 2.0), Error);
  EXPECT_THROW(QsTestMap::composite({0, 0.5, 1}, {1, 3}, 2.0), Error);
}

TEST(TreeBound, IdentitiesAndConsistency) {
  const Interval I(R(0), R(1));
  const IntervalSet X(I, {Interval(R(0.1), R(0.2)), Interval(R(0.6), R(0.65))});
  const IntervalSet whole(I, {I});
  const auto direct = capacity_bounds(X, 2.0, 2);
  EXPECT_EQ(tree_decompose_bound(X, whole, {direct}, 2.0), direct.upper);
  EXPECT_TRUE(tree_decompose_bound(IntervalSet(I, {}), whole, {direct}, 2.0).is_zero());
  const IntervalSet cover(I, {Interval(R(0.05), R(0.3)), Interval(R(0.5), R(0.7))});
  EXPECT_GE(tree_decompose_bound(X, cover, 2.0, 2), direct.lower);
  const IntervalSet bad(I, {Interval(R(0.0), R(0.15))});
  EXPECT_THROW(tree_decompose_bound(X, bad, 2.0, 1), Error);
}

TEST(TreeBound, RandomTwoLevelTrees) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0), g(1.0, 3.0);
  int violations = 0;
  for (int t = 0; t < 200; ++t) {
    const Interval I(R(0), R(1));
    const int pieces = 1 + static_cast<int>(u(rng) * 4);
    std::vector<double> pts;
    for (int i = 0; i < 2 * pieces; ++i) pts.push_back(u(rng));
    std::sort(pts.begin(), pts.end());
    std::vector<Interval> cov, xs;
    for (int i = 0; i < pieces; ++i) {
      const double a = pts[2 * i], b = pts[2 * i + 1];
      cov.emplace_back(R(a), R(b));
      double s = a + (b - a) * u(rng) * 0.5, e = s + (b - s) * u(rng);
      if (e > s) xs.emplace_back(R(s), R(e));
    }
    const IntervalSet X(I, xs), C(I, cov);
    const double gamma = g(rng);
    const int effort = 1 + t % 3;
    if (tree_decompose_bound(X, C, gamma, effort) < capacity_bounds(X, gamma, effort).lower) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Pullback, RemarkEstimate) {
  const ExponentConstants p = ExponentConstants::practical();
  EXPECT_NEAR(pullback_capacity_bound(1e-9, 1, p).bound, std::pow(10.0, -9.0 / 8), 1e-12);
  EXPECT_NEAR(pullback_capacity_bound(1e-9, 1, p).bound, 0.075, 1e-3);
  EXPECT_LT(pullback_capacity_bound(1e-200, 5, p).bound, 1e-20);
  const auto tr = pullback_capacity_bound(1e-6, 2, p).trace;
  EXPECT_NEAR(tr.neighborhood, 1e-3, 1e-15);
  EXPECT_NEAR(tr.central_capacity, 2 * std::pow(1e-6, 0.25), 1e-12);
  try {
    pullback_capacity_bound(1e-9, 2, ExponentConstants::faithful());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HypothesisViolated);
  }
  EXPECT_THROW(pullback_capacity_bound(0.5, 2, p), Error);  // 0.5 >= 2^-2
}
