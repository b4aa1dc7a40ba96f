#include <gtest/gtest.h>

#include "parawindow_oracle.hpp"
#include "qnest/parallel.hpp"
#include "qnest/parawindow.hpp"

using namespace qnest;

namespace {

const NestReport& base19() {
  static const NestReport rep = [] {
    NestBudgets b;
    b.time_budget = 16;
    b.depth = 3;
    return build_nest(invariant_interval(Real::parse("1.9", 256)), b);
  }();
  return rep;
}

pw_oracle::Want want_of(const LevelCombinatorics& c) {
  pw_oracle::Want w;
  w.v = c.v;
  for (auto s : c.crit_signs) w.crit_signs.push_back(s);
  for (const auto& t : c.targets) w.target_signs.emplace_back(t.itinerary.begin(), t.itinerary.end());
  return w;
}

bool inside(const ParaWindow& small, const ParaWindow& big) {
  return big.lo_outer <= small.lo_inner && small.hi_inner <= big.hi_outer;
}

}  // namespace

TEST(ParaWindow, ScalesMatchNest) {
  const auto& rep = base19();
  const LevelCombinatorics c = combinatorics_of(rep.levels, static_cast<int>(rep.levels.size()), {});
  const ParamProbe pr = detail::probe_parameter(rep.param.a, c, true);
  ASSERT_TRUE(pr.member);
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    EXPECT_LT(abs(pr.p[i] - rep.levels[i].p()).to_double(), 1e-60) << i;
    EXPECT_EQ(pr.v[i], *rep.levels[i].v);
  }
}

TEST(ParaWindow, OwnWindowsNest) {
  const auto& rep = base19();
  const long tau1 = *rep.levels[0].tau, tau2 = *rep.levels[1].tau;
  ASSERT_NE(tau1, 0);
  ASSERT_NE(tau2, 0);
  const ParaWindow j1 = level_window(rep, 1);
  const ParaWindow j1t = parameter_window(rep, 1, {tau1});
  const ParaWindow j2 = level_window(rep, 2);
  const ParaWindow j2t = parameter_window(rep, 2, {tau2});
  for (const auto* w : {&j1, &j1t, &j2, &j2t}) {
    EXPECT_LE(w->lo_inner, rep.param.a);
    EXPECT_GE(w->hi_inner, rep.param.a);
    EXPECT_LT(w->lo_outer, w->lo_inner);
    EXPECT_GT(w->hi_outer, w->hi_inner);
  }
  EXPECT_TRUE(inside(j1t, j1));
  EXPECT_TRUE(inside(j2, j1t));
  EXPECT_TRUE(inside(j2t, j2));
  EXPECT_LT(j2t.width(), j2.width());
}

TEST(ParaWindow, SiblingsDisjoint) {
  const auto& rep = base19();
  const ReturnSystem& l2 = rep.levels[1];
  std::vector<ParaWindow> ws;
  for (long j : {1L, -1L, 2L, -2L, *l2.tau}) {
    try {
      ws.push_back(parameter_window(rep, 2, {j}));
    } catch (const Error& e) {
      ADD_FAILURE() << j << " " << e.what();
    }
  }
  for (std::size_t i = 0; i < ws.size(); ++i) {
    for (std::size_t k = i + 1; k < ws.size(); ++k) {
      if (ws[i].target == ws[k].target) continue;
      EXPECT_TRUE(ws[i].hi_inner < ws[k].lo_inner || ws[k].hi_inner < ws[i].lo_inner) << i << " " << k;
    }
  }
}

TEST(ParaWindow, DenseScanAgrees) {
  const auto& rep = base19();
  const long tau2 = *rep.levels[1].tau;
  const ParaWindow w = parameter_window(rep, 2, {tau2});
  const auto want = want_of(combinatorics_of(rep.levels, 2, {tau2}));
  const double lo = w.lo_outer.to_double(), hi = w.hi_outer.to_double();
  const double pad = 2 * (hi - lo);
  const long N = 4000;
  std::vector<char> in(N);
  parallel_for(N, default_threads(), [&](std::size_t i) {
    const long double g = (lo - pad) + (hi - lo + 2 * pad) * (static_cast<long double>(i) + 0.5) / N;
    in[i] = pw_oracle::member(g, want);
  });
  long first = -1, last = -1, count = 0;
  for (long i = 0; i < N; ++i) {
    if (in[i]) {
      if (first < 0) first = i;
      last = i;
      ++count;
    }
  }
  ASSERT_GT(count, 0);
  EXPECT_EQ(count, last - first + 1);
  const double step = (hi - lo + 2 * pad) / N;
  const double scan_width = count * step;
  const double ratio = w.width().to_double() / scan_width;
  EXPECT_GT(ratio, 0.5);
  EXPECT_LT(ratio, 2.0);
}

TEST(ParaWindow, RejectsMissingLevels) {
  EXPECT_THROW(level_window(base19(), 9), Error);
  EXPECT_THROW(parameter_window(base19(), 2, {0}), Error);
}
