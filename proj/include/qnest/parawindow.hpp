#pragma once

// Parameter windows: the interval of parameters g around a base for which
// the central-return combinatorics up to level n agrees with the base and
// R_n[g](0) falls into a chosen sequence of branches. Branches are carried
// across parameters by (return time, sign itinerary), which singles out a
// monotone lap of f^r.

#include <optional>
#include <string>
#include <vector>

#include "qnest/dynamics.hpp"
#include "qnest/nest.hpp"

namespace qnest {

struct BranchTarget {
  long index = 0;                      // index in the base nest, for reporting
  int r = 0;
  std::vector<signed char> itinerary;  // sign of f^k, k = 0..r-1
};

struct LevelCombinatorics {
  int level = 0;
  std::vector<long> v;                 // v_1..v_n
  std::vector<signed char> crit_signs; // sign of f^k(0), k = 1..v_n - 1
  std::vector<BranchTarget> targets;   // R_n(0) follows these in order
};

struct ParamProbe {
  bool member = false;
  double margin = 0;         // smallest gap met in a decisive comparison
  std::vector<long> v;       // entry times found (as far as computed)
  std::vector<Real> p;       // p_1..p_n
};

namespace detail {

inline signed char sgn(const Real& x) { return static_cast<signed char>(x.sign() < 0 ? -1 : 1); }

// p_1..p_n and v_1..v_n for parameter g, with the orbit of 0.
inline ParamProbe probe_parameter(const Real& g, const LevelCombinatorics& want, bool check) {
  ParamProbe out;
  const mpfr_prec_t prec = g.precision();
  if (g.sign() <= 0 || g > Real(2L, prec)) return out;
  const int n = want.level;
  std::vector<Real> x{Real(prec)};
  auto orbit = [&](long k) -> const Real& {
    while (static_cast<long>(x.size()) <= k) x.push_back(quadratic(g, x.back()));
    return x[k];
  };
  double margin = INFINITY;
  auto note = [&](const Real& gap) { margin = std::min(margin, std::abs(gap.to_double())); };
  // positive fixed point
  Real p = (sqrt(g * 4L + 1L) - 1L) / 2L;
  const long cap = 1L << 14;
  for (int i = 1; i <= n; ++i) {
    out.p.push_back(p);
    long vi = 0;
    for (long k = 1; k <= cap; ++k) {
      const Real& y = orbit(k);
      if (abs(y) < p) {
        vi = k;
        break;
      }
      if (check && k > want.v[i - 1]) return out;  // already disagrees
    }
    if (vi == 0) return out;
    note(abs(orbit(vi)) - p);
    out.v.push_back(vi);
    if (check && vi != want.v[i - 1]) return out;
    if (i == n) break;
    // next central boundary: pull +-p back along the critical itinerary
    std::vector<signed char> s{1};
    int orient = vi % 2 == 0 ? 1 : -1;
    for (long k = 1; k < vi; ++k) {
      s.push_back(sgn(orbit(k)));
      orient *= s.back();
    }
    const Real y = orient > 0 ? p : -p;
    MapParam m{g, Real(prec)};
    p = detail::pull_value(m, y, s);
  }
  if (!check) {
    out.member = true;
    out.margin = margin;
    return out;
  }
  const long vn = want.v.back();
  for (long k = 1; k < vn; ++k) {
    if (sgn(orbit(k)) != want.crit_signs[k - 1]) return out;
    note(orbit(k));
  }
  long t = vn;
  const Real& pn = out.p.back();
  for (const auto& tg : want.targets) {
    for (int k = 0; k < tg.r; ++k) {
      const Real& y = orbit(t + k);
      if (sgn(y) != tg.itinerary[k]) return out;
      note(y);
      if (k > 0) {
        if (abs(y) < pn) return out;
        note(abs(y) - pn);
      }
    }
    t += tg.r;
    if (!(abs(orbit(t)) < pn)) return out;
    note(abs(orbit(t)) - pn);
  }
  out.member = true;
  out.margin = margin;
  return out;
}

}  // namespace detail

inline bool in_window(const Real& g, const LevelCombinatorics& c) {
  return detail::probe_parameter(g, c, true).member;
}

// Combinatorics of the base nest up to level n (1-based) with R_n(0) sent
// through `path` (level-n branch indices; empty: no constraint beyond v_n).
inline LevelCombinatorics combinatorics_of(const std::vector<ReturnSystem>& levels, int n,
                                           const std::vector<long>& path) {
  if (n < 1 || static_cast<std::size_t>(n) > levels.size()) {
    throw Error(ErrorKind::InsufficientDepth, "base nest does not reach level " + std::to_string(n), n);
  }
  LevelCombinatorics c;
  c.level = n;
  for (int i = 0; i < n; ++i) {
    if (!levels[i].v) throw Error(ErrorKind::CombinatoricsUnstable, "entry time unknown at a base level", i + 1);
    c.v.push_back(*levels[i].v);
  }
  const ReturnSystem& rs = levels[n - 1];
  for (long k = 1; k < c.v.back(); ++k) c.crit_signs.push_back(detail::sgn(rs.crit->at(k).v));
  for (long j : path) {
    if (j == 0) throw Error(ErrorKind::InvalidAddress, "the central domain is not a target");
    const ReturnBranch& b = rs.branch(j);
    c.targets.push_back({j, b.return_time, b.itinerary});
  }
  return c;
}

struct ParaWindowOptions {
  int max_bisections = 4096;  // bisection also stops once the midpoint is not representable
  long initial_step_exp = -48;  // first outward step 2^e
};

struct ParaWindow {
  int level = 0;
  std::vector<long> target;
  Real seed;
  Real lo_inner, lo_outer, hi_inner, hi_outer;  // members inside, non-members outside
  bool lo_at_boundary = false, hi_at_boundary = false;
  long probes = 0;
  double seed_margin = 0;
  mpfr_prec_t precision = 0;

  Real width() const { return hi_inner - lo_inner; }
};

namespace detail {

// From member g0, walks outward in direction dir, then bisects the flip.
inline void bracket(const LevelCombinatorics& c, const Real& g0, int dir, const ParaWindowOptions& o, Real& inner,
                    Real& outer, bool& at_boundary, long& probes) {
  const mpfr_prec_t prec = g0.precision();
  const Real lo_edge{Real(prec)}, hi_edge(2L, prec);
  Real in = g0;
  Real out(prec);
  bool found = false;
  for (long e = o.initial_step_exp; e <= 2; ++e) {
    Real g = g0 + pow2(e, prec) * static_cast<long>(dir);
    if (dir > 0 && g > hi_edge) g = hi_edge;
    if (dir < 0 && g < lo_edge) g = lo_edge;
    ++probes;
    if (!in_window(g, c)) {
      out = g;
      found = true;
      break;
    }
    in = g;
    if (g == hi_edge || g == lo_edge) break;
  }
  if (!found) {
    inner = in;
    outer = in;
    at_boundary = true;
    return;
  }
  for (int i = 0; i < o.max_bisections; ++i) {
    Real mid = (in + out) / 2L;
    if (mid == in || mid == out) break;
    ++probes;
    (in_window(mid, c) ? in : out) = mid;
  }
  inner = in;
  outer = out;
}

inline ParaWindow grow_window(const LevelCombinatorics& c, const Real& seed, const ParaWindowOptions& o) {
  ParaWindow w;
  w.level = c.level;
  for (const auto& t : c.targets) w.target.push_back(t.index);
  w.seed = seed;
  w.precision = seed.precision();
  bracket(c, seed, -1, o, w.lo_inner, w.lo_outer, w.lo_at_boundary, w.probes);
  bracket(c, seed, +1, o, w.hi_inner, w.hi_outer, w.hi_at_boundary, w.probes);
  if (!(w.hi_inner > w.lo_inner)) {
    throw Error(ErrorKind::CombinatoricsUnstable, "window narrower than the working precision resolves", c.level);
  }
  return w;
}

}  // namespace detail

// Window J_n of the base combinatorics (no target).
inline ParaWindow level_window(const NestReport& base, int n, const ParaWindowOptions& o = {}) {
  const LevelCombinatorics c = combinatorics_of(base.levels, n, {});
  const ParamProbe pr = detail::probe_parameter(base.param.a, c, true);
  const double tol = std::ldexp(1.0, -static_cast<int>(base.param.a.precision() / 2));
  if (!pr.member || pr.margin < tol) {
    throw Error(ErrorKind::CombinatoricsUnstable, "base combinatorics not verified at this precision", n);
  }
  ParaWindow w = detail::grow_window(c, base.param.a, o);
  w.seed_margin = pr.margin;
  return w;
}

// Window J^path_n: level-n combinatorics of the base and R_n[g](0) passing
// through the branches of `path` in order.
inline ParaWindow parameter_window(const NestReport& base, int n, const std::vector<long>& path,
                                   const ParaWindowOptions& o = {}) {
  const LevelCombinatorics c = combinatorics_of(base.levels, n, path);
  const Real& a = base.param.a;
  const mpfr_prec_t prec = a.precision();
  const double tol = std::ldexp(1.0, -static_cast<int>(prec / 2));
  const ParamProbe pr = detail::probe_parameter(a, c, true);
  if (pr.member) {
    if (pr.margin < tol) throw Error(ErrorKind::CombinatoricsUnstable, "base sits on a window boundary", n);
    ParaWindow w = detail::grow_window(c, a, o);
    w.seed_margin = pr.margin;
    return w;
  }
  // seed: inside J_n solve f^{v_n}(0) = (point of the path landing exactly at 0)
  const ParaWindow jn = level_window(base, n, o);
  const long vn = c.v.back();
  auto h = [&](const Real& g) {
    MapParam m{g, Real(prec)};
    Real x(prec);
    for (long k = 0; k < vn; ++k) x = quadratic(g, x);
    Real y(prec);
    for (std::size_t i = c.targets.size(); i-- > 0;) y = detail::pull_value(m, y, c.targets[i].itinerary);
    return x - y;
  };
  Real lo = jn.lo_inner, hi = jn.hi_inner;
  const int slo = h(lo).sign(), shi = h(hi).sign();
  if (slo == 0 || shi == 0 || slo == shi) {
    throw Error(ErrorKind::CombinatoricsUnstable, "target not reachable inside the level window", n);
  }
  for (int i = 0; i < o.max_bisections; ++i) {
    Real mid = (lo + hi) / 2L;
    if (mid == lo || mid == hi) break;
    (h(mid).sign() == slo ? lo : hi) = mid;
  }
  const Real seed = (lo + hi) / 2L;
  const ParamProbe ps = detail::probe_parameter(seed, c, true);
  if (!ps.member) throw Error(ErrorKind::CombinatoricsUnstable, "seed parameter misses the target", n);
  ParaWindow w = detail::grow_window(c, seed, o);
  w.seed_margin = ps.margin;
  return w;
}

}  // namespace qnest
