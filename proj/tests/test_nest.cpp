#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "qnest/nest.hpp"

using namespace qnest;

namespace {

MapParam param(const char* a, mpfr_prec_t prec = 256) {
  return invariant_interval(Real::parse(a, prec));
}

NestBudgets budgets(int time, int count = 4096, int depth = 3) {
  NestBudgets b;
  b.time_budget = time;
  b.count_budget = count;
  b.depth = depth;
  return b;
}

// Compares discovered non-central branches with the refined grid blocks.
void expect_matches_oracle(const ReturnSystem& rs, double a, int T, long N, long tol_exp) {
  const MapParam& m = rs.param();
  const double p = rs.p().to_double();
  auto blocks = oracle::grid_scan(a, p, T, N);
  // the central branch shows up as the two runs adjacent to 0
  std::vector<oracle::Block> noncentral;
  for (const auto& b : blocks) {
    const bool central = rs.central && rs.central->domain.contains(Real(b.lo, 256)) &&
                         rs.central->domain.contains(Real(b.hi, 256));
    if (!central) noncentral.push_back(b);
  }
  auto refined = oracle::refine(m.a, rs.p(), noncentral, N);
  std::vector<const ReturnBranch*> mine;
  for (const auto& br : rs.branches) {
    if (br.return_time <= T) mine.push_back(&br);
  }
  ASSERT_EQ(mine.size(), refined.size());
  const Real tol = pow2(-tol_exp, m.precision());
  for (std::size_t i = 0; i < mine.size(); ++i) {
    EXPECT_EQ(mine[i]->return_time, refined[i].time) << i;
    EXPECT_LT(abs(mine[i]->domain.lo() - refined[i].lo), tol) << i;
    EXPECT_LT(abs(mine[i]->domain.hi() - refined[i].hi), tol) << i;
  }
}

}  // namespace

TEST(TreeAddress, Shifts) {
  TreeAddress d({1, -2, 3});
  EXPECT_EQ(d.sigma_plus(), TreeAddress({1, -2}));
  EXPECT_EQ(d.sigma_minus(), TreeAddress({-2, 3}));
  EXPECT_THROW(TreeAddress({1, 0}), Error);
  EXPECT_THROW(TreeAddress().sigma_plus(), Error);
}

TEST(FirstLevel, FullFamilyMember) {
  const ReturnSystem rs = build_first_level(param("2"), budgets(8));
  EXPECT_EQ(rs.p(), Real(1L, 256));
  EXPECT_FALSE(rs.central.has_value());
  expect_matches_oracle(rs, 2.0, 8, 1000000, 100);
}

TEST(FirstLevel, RefusesAttractingFixedPoint) {
  try {
    build_first_level(param("0.5"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoOrientationReversingPoint);
  }
  try {
    build_first_level(param("0.75"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParabolicObstruction);
  }
}

TEST(FirstLevel, MatchesGridScanAt19) {
  const ReturnSystem rs = build_first_level(param("1.9"), budgets(20));
  EXPECT_NEAR(rs.p().to_double(), (-1 + std::sqrt(8.6)) / 2, 1e-15);
  ASSERT_TRUE(rs.central);
  EXPECT_EQ(*rs.v, 4);
  expect_matches_oracle(rs, 1.9, 20, 200000, 100);
}

TEST(FirstLevel, TilingIsExact) {
  for (const char* a : {"1.8", "1.9", "1.95", "2"}) {
    const ReturnSystem rs = build_first_level(param(a), budgets(14));
    Real total = rs.uncovered_measure;
    for (const auto& b : rs.branches) total += b.domain.hi() - b.domain.lo();
    if (rs.central) total += rs.central->domain.hi() - rs.central->domain.lo();
    const Real err = abs(total - rs.interval.hi() * 2L);
    EXPECT_LT(err, rs.interval.hi() * pow2(-64, 256)) << a;
  }
}

TEST(FirstLevel, BranchesAreDisjointAndAnchored) {
  const MapParam m = param("1.95");
  const ReturnSystem rs = build_first_level(m, budgets(16));
  for (std::size_t i = 1; i < rs.branches.size(); ++i) {
    EXPECT_LE(rs.branches[i - 1].domain.hi(), rs.branches[i].domain.lo());
  }
  for (const auto& b : rs.branches) {
    for (const Interval* e : {&b.lo_box, &b.hi_box}) {
      Interval y = *e;
      for (int k = 0; k < b.return_time; ++k) y = m.f(y);
      EXPECT_TRUE(y.intersects(rs.boundary_box) || y.intersects(-rs.boundary_box)) << b.index;
    }
  }
}

TEST(FirstLevel, SmallBudgetLeavesUncoveredMeasure) {
  // near the period-3 superattracting parameter the critical piece carries
  // everything that has not returned, so even tiny budgets cover I
  const ReturnSystem probe = build_first_level(param("1.754877666"), budgets(2, 2));
  EXPECT_TRUE(probe.uncovered_measure.is_zero());
  // level 1 is finite at a = 1.95; the budget bites one level down
  const ReturnSystem l1 = build_first_level(param("1.95"), budgets(20, 64));
  const ReturnSystem rs = build_next_level(l1, budgets(20, 64));
  EXPECT_TRUE(rs.budget_exceeded);
  EXPECT_GT(rs.uncovered_measure.to_double(), 0.0);
  Real total = rs.uncovered_measure;
  for (const auto& b : rs.branches) total += b.domain.width();
  total += rs.central->domain.width();
  EXPECT_LT(abs(total - rs.interval.width()).to_double(), 1e-60);
}

TEST(Landing, EmptyAndSingle) {
  const MapParam m = param("1.9");
  const ReturnSystem rs = build_first_level(m, budgets(20));
  const auto e = landing_components(rs, TreeAddress());
  EXPECT_EQ(e.outer.value().hi(), rs.boundary_box.mid());
  EXPECT_EQ(landing_time(rs, TreeAddress()), 0);
  for (const auto& b : rs.branches) {
    const auto lc = landing_components(rs, TreeAddress({b.index}));
    EXPECT_EQ(landing_time(rs, TreeAddress({b.index})), b.return_time);
    EXPECT_LT(abs(lc.outer.value().lo() - b.domain.lo()), pow2(-200, 256));
    // forward oracle: grid points of C^(j) land in I^0 after r iterates
    const Interval core = lc.core.value();
    for (int g = 1; g < 20; ++g) {
      Real x = core.lo() + core.width() * static_cast<long>(g) / 20L;
      for (int k = 0; k < b.return_time; ++k) x = m.f(x);
      EXPECT_TRUE(rs.central->domain.contains(x));
    }
  }
  EXPECT_THROW(landing_components(rs, TreeAddress({999})), Error);
}

TEST(Landing, RandomAddressTimesByForwardCount) {
  const MapParam m = param("1.9");
  const ReturnSystem rs = build_first_level(m, budgets(20));
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> pick(0, static_cast<long>(rs.branches.size()) - 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<long> e;
    for (int i = 0; i < 5; ++i) e.push_back(rs.branches[pick(rng)].index);
    const TreeAddress d(e);
    const auto lc = landing_components(rs, d);
    Real x = lc.core.value().mid();
    long count = 0;
    while (!rs.central->domain.contains(x)) {
      x = m.f(x);
      ++count;
      ASSERT_LT(count, 10000);
    }
    EXPECT_EQ(count, landing_time(rs, d));
    EXPECT_EQ(landing_time(rs, d), landing_time(rs, d.sigma_plus()) + rs.branch(e.back()).return_time);
  }
}

TEST(Nest, LevelsAt19) {
  const NestReport rep = build_nest(param("1.9"), budgets(16, 4096, 3));
  ASSERT_GE(rep.levels.size(), 2u);
  for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
    const ReturnSystem& a = rep.levels[i];
    const ReturnSystem& b = rep.levels[i + 1];
    EXPECT_EQ(b.interval.hi(), a.central->domain.hi());
    EXPECT_LT(b.interval.hi(), a.interval.hi());
    EXPECT_EQ(*b.v, *a.v + landing_time(a, *a.critical_address));
    ASSERT_TRUE(b.gape);
    // gape sits between I_{n+1} and I_n and never cuts a branch
    for (const auto& br : b.branches) {
      const bool inside = b.gape->contains(br.domain);
      const bool outside = br.domain.disjoint_interior(*b.gape);
      EXPECT_TRUE(inside || outside) << br.index;
    }
  }
}

TEST(Nest, TerminationReasons) {
  EXPECT_EQ(build_nest(param("2")).termination, Termination::BudgetExhausted);
  EXPECT_EQ(build_nest(param("0.5")).termination, Termination::RegularDetected);
  EXPECT_EQ(build_nest(param("0.75")).termination, Termination::ParabolicObstruction);
  const NestReport r = build_nest(param("1.401155"));
  EXPECT_EQ(r.termination, Termination::RenormalizationDetected);
  EXPECT_EQ(detect_central_and_simple(r).verdict, "CentralCascade");
}

TEST(Nest, CentralFlags) {
  const NestReport r2 = build_nest(param("2"));
  const auto v = detect_central_and_simple(r2);
  ASSERT_EQ(v.central_flags.size(), 1u);
  EXPECT_FALSE(v.central_flags[0]);
  NestReport empty{param("2"), {}, Termination::BudgetExhausted, std::nullopt, "", 256};
  EXPECT_EQ(detect_central_and_simple(empty).verdict, "Undetermined");
}

TEST(Hyperbolic, ExponentAndEntry) {
  const ReturnSystem rs = build_first_level(param("1.9"), budgets(12));
  EXPECT_TRUE(hyperbolic_outside(rs, Real::parse("0.5"), 0).degenerate);
  // brute-force first entry into I_2
  const MapParam& m = rs.param();
  Real x = Real::parse("0.3");
  long entry = -1;
  Real y = x;
  for (int k = 0; k < 200; ++k) {
    if (rs.central->domain.contains(y)) {
      entry = k;
      break;
    }
    y = m.f(y);
  }
  ASSERT_GE(entry, 0);
  try {
    hyperbolic_outside(rs, x, 200);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OrbitEntersNest);
    EXPECT_EQ(*e.index(), entry);
  }
}
