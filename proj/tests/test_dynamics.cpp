#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qnest/dynamics.hpp"

using namespace qnest;

namespace {

MapParam param(const char* a, mpfr_prec_t prec = 256) {
  return invariant_interval(Real::parse(a, prec));
}

bool ulps_ok(const Real& x, const Real& y, long exp2) {
  return (abs(x - y) < pow2(-exp2, x.precision()));
}

}  // namespace

TEST(InvariantInterval, ClosedForms) {
  EXPECT_EQ(param("2").beta, Real(2L, 256));
  EXPECT_EQ(param("0").beta, Real(1L, 256));
  EXPECT_EQ(param("-0.25").beta, Real::parse("0.5"));
}

TEST(InvariantInterval, OutOfRange) {
  try {
    param("2.0000001");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParamOutOfRange);
  }
  EXPECT_THROW(param("-0.3"), Error);
}

TEST(InvariantInterval, InclusionHoldsOnRandomParams) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.25, 2.0);
  for (int i = 0; i < 200; ++i) {
    const MapParam m = invariant_interval(Real(u(rng), 128));
    // squaring a 128-bit endpoint is exact at 264 bits
    const Interval I = m.interval().with_precision(264);
    const Interval img = quadratic(Interval(m.a).with_precision(264), I);
    EXPECT_TRUE(I.contains(img));
  }
}

TEST(Iterate, ClosedFormOrbit) {
  const MapParam m = param("2");
  const OrbitSample s = iterate(m, Real(0L, 256), 3);
  ASSERT_EQ(s.points.size(), 4u);
  EXPECT_EQ(s.points[1], Real(2L, 256));
  EXPECT_EQ(s.points[2], Real(-2L, 256));
  EXPECT_EQ(s.points[3], Real(-2L, 256));
  // orbit passes through 0 at time 0: no derivative beyond the start
  EXPECT_EQ(s.zero_hit, 0u);
  EXPECT_FALSE(s.logderiv(1).has_value());
}

TEST(Iterate, LogDerivativeOfBoundaryOrbit) {
  const MapParam m = param("2");
  const OrbitSample s = iterate(m, Real(2L, 256), 2);
  EXPECT_NEAR(s.logderiv(2)->to_double(), std::log(16.0), 1e-15);
}

TEST(Iterate, MatchesHigherPrecisionRerun) {
  // Chaotic orbit: the 256-bit error grows like exp(0.24 k); 300 steps keep
  // it far below 2^-128.
  const MapParam m = param("1.5", 256);
  const MapParam hi = param("1.5", 1024);
  const OrbitSample s = iterate(m, Real(0L, 256), 300);
  const OrbitSample t = iterate(hi, Real(0L, 1024), 300);
  for (std::size_t k = 0; k <= 300; ++k) {
    ASSERT_TRUE(ulps_ok(s.points[k].with_precision(1024), t.points[k], 128)) << k;
  }
}

TEST(Iterate, ChainRuleAgainstProductOracle) {
  const MapParam m = param("1.9", 256);
  const OrbitSample s = iterate(m, Real::parse("0.3"), 60);
  Real prod(1L, 512);
  for (std::size_t k = 0; k < 60; ++k) prod *= abs(s.points[k].with_precision(512) * 2L);
  EXPECT_TRUE(ulps_ok(s.logderiv(60)->with_precision(512), log(prod), 128));
}

TEST(Iterate, IntervalSoundness) {
  const MapParam m = param("1.8", 256);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = std::uniform_real_distribution<double>(-1.7, 1.7)(rng);
    Interval box(Real(c, 256), Real(c + 1e-60, 256));
    Real x(c + 5e-61, 256);
    for (int n = 0; n < 1000; ++n) {
      ASSERT_TRUE(box.contains(x)) << n;
      box = m.f(box);
      x = m.f(x);
      if (box.width() > Real(1.0, 256)) break;
    }
  }
}

TEST(Distortion, IdentityAndMonotoneCase) {
  const MapParam m = param("2");
  const Interval J(Real::parse("1.1"), Real::parse("1.2"));
  EXPECT_EQ(distortion(m, J, 0), Real(1L, 256));
  const double d = distortion(m, J, 1).to_double();
  EXPECT_GE(d, 12.0 / 11.0);
  EXPECT_NEAR(d, 12.0 / 11.0, 1e-12);
}

TEST(Distortion, RefinementIsMonotone) {
  const MapParam m = param("1.9");
  const Interval J(Real::parse("0.4"), Real::parse("0.41"));
  const Real whole = distortion(m, J, 6, 1);
  const Real left = distortion(m, Interval(J.lo(), J.mid()), 6, 1);
  const Real right = distortion(m, Interval(J.mid(), J.hi()), 6, 1);
  EXPECT_GE(whole, max(left, right));
  EXPECT_GE(left, Real(1L, 256));
}

TEST(Distortion, CriticalPointInsideRaises) {
  const MapParam m = param("1.9");
  try {
    distortion(m, Interval(Real::parse("-0.1"), Real::parse("0.1")), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotDiffeomorphic);
  }
}

TEST(FixedPoints, ClosedForms) {
  const FixedPoints f2 = find_fixed_points(param("2"));
  EXPECT_EQ(f2.p, Real(1L, 256));
  EXPECT_EQ(f2.multiplier, Real(-2L, 256));
  const FixedPoints f34 = find_fixed_points(param("0.75"));
  EXPECT_EQ(f34.p, Real::parse("0.5"));
  EXPECT_EQ(f34.multiplier, Real(-1L, 256));
  const MapParam half = param("0.5");
  const FixedPoints fh = find_fixed_points(half);
  EXPECT_NEAR(fh.p.to_double(), (-1.0 + std::sqrt(3.0)) / 2.0, 1e-15);
  EXPECT_LT(abs(fh.multiplier), Real(1L, 256));
  EXPECT_LT(abs(half.f(fh.p) - fh.p), pow2(-248, 256));
  EXPECT_LT(abs(half.f(fh.q) - fh.q), pow2(-248, 256));
}

TEST(AttractingCycle, Superattracting) {
  auto c0 = find_attracting_cycle(param("0"), 8, 64);
  ASSERT_TRUE(c0);
  EXPECT_EQ(c0->period, 1);
  EXPECT_TRUE(c0->multiplier.is_zero());

  auto c1 = find_attracting_cycle(param("1"), 8, 64);
  ASSERT_TRUE(c1);
  EXPECT_EQ(c1->period, 2);
  EXPECT_TRUE(c1->points[0].is_zero());
  EXPECT_EQ(c1->points[1], Real(1L, 256));
  EXPECT_TRUE(c1->multiplier.is_zero());
}

TEST(AttractingCycle, RepellingOrNone) {
  EXPECT_FALSE(find_attracting_cycle(param("2"), 8, 64).has_value());
  EXPECT_FALSE(find_attracting_cycle(param("1.9"), 16, 2000).has_value());
}

TEST(AttractingCycle, PeriodThreeWindow) {
  auto c = find_attracting_cycle(param("1.76"), 16, 4000);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->period, 3);
  EXPECT_LT(c->multiplier_bound, Real(1L, 256));
}

TEST(Renormalization, PeriodDoublingRegime) {
  EXPECT_EQ(find_renormalization(param("1.3"), 8), 2);
  EXPECT_FALSE(find_renormalization(param("2"), 8).has_value());
}
