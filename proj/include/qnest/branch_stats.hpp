#pragma once

// Statistics over return branches and landings: the standard/fast/excellent/
// cool landing classes, very good and bad returns, good (hyperbolic) returns,
// return and landing time capacities, and a Monte Carlo harness for the
// Borel-Cantelli type argument.
//
// Classification runs on LevelData, a plain record of one nest level. It can
// be extracted from a computed nest or written by hand.

#include <gmp.h>

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "qnest/capacity.hpp"
#include "qnest/constants.hpp"
#include "qnest/nest.hpp"
#include "qnest/parallel.hpp"
#include "qnest/rng.hpp"

namespace qnest {

struct LevelData {
  int n = 0;
  std::optional<double> ln_c;       // ln c_n
  std::optional<double> ln_c_prev;  // ln c_{n-1}
  std::optional<long> v;            // v_n
  std::optional<long> tau;          // branch of R_n(0)
  std::optional<std::vector<long>> critical_address;
  std::map<long, long> r;           // r_n(j), j != 0
  // landing address at level n-1 of R_{n-1}(I^j_n)
  std::map<long, std::optional<std::vector<long>>> parent_address;
  // ln(dist(I^j_n, 0) / |I_n|)
  std::map<long, double> ln_dist_ratio;
  // entry k: lower bound of inf over I^j_n of ln|Df^k|, k = 0..r_n(j)
  std::map<long, std::vector<double>> log_deriv;

  long time(long j) const {
    auto it = r.find(j);
    if (it == r.end()) throw Error(ErrorKind::InvalidAddress, "no branch " + std::to_string(j), j);
    return it->second;
  }
};

// c^e from ln c, with the usual IEEE conventions for the degenerate profile
inline double cpow(double ln_c, double e) {
  const double x = e * ln_c;
  return std::isnan(x) ? 1.0 : std::exp(x);
}

struct Check {
  bool ok = true;
  long witness = 0;  // minimal failing index or prefix length (1-based), 0 when ok
  void fail(long w) {
    if (ok) {
      ok = false;
      witness = w;
    }
  }
};

struct LandingFlags {
  long m = 0;
  Check ls1, ls2, ls3, lf1;
  bool ls = false, lf = false;
  std::optional<Check> le1, le2;
  std::optional<bool> le;
  std::optional<Check> lc1, lc2, lc3, lc4, lc5;
  std::optional<bool> lc;
};

namespace detail {

inline double sparsity_factor(int n) { return 6.0 * std::ldexp(1.0, n); }

inline void require_levels(const LevelData& L) {
  if (!L.ln_c) throw Error(ErrorKind::MissingLevelData, "c_n unknown at level " + std::to_string(L.n), L.n);
  if (!L.ln_c_prev) {
    throw Error(ErrorKind::MissingLevelData, "c_{n-1} unknown at level " + std::to_string(L.n), L.n);
  }
}

// For integer k in [k_lo, m] (k_lo real, inclusive when `inclusive`), checks
// count(k) < factor * k where count(k) = #{i <= k : pred(i)}.
template <class Pred>
Check prefix_sparsity(long m, double k_lo, bool inclusive, double factor, Pred pred) {
  Check c;
  long count = 0;
  for (long k = 1; k <= m; ++k) {
    if (pred(k)) ++count;
    const bool active = inclusive ? static_cast<double>(k) >= k_lo : static_cast<double>(k) > k_lo;
    if (active && !(static_cast<double>(count) < factor * static_cast<double>(k))) {
      c.fail(k);
      break;
    }
  }
  return c;
}

}  // namespace detail

// LS1-LS3 and LF1 for a landing d = (j_1..j_m) at level L.n.
inline LandingFlags classify_landing_LS_LF(const LevelData& L, const std::vector<long>& d,
                                           const ExponentConstants& c) {
  detail::require_levels(L);
  const double lc = *L.ln_c, lp = *L.ln_c_prev;
  LandingFlags f;
  const long m = static_cast<long>(d.size());
  f.m = m;
  const double md = static_cast<double>(m);
  if (!(cpow(lc, -c.a / 2) < md && md < cpow(lc, -2 * c.b))) f.ls1.fail(std::max<long>(m, 1));
  const double big = cpow(lp, -3 * c.b);
  for (long i = 0; i < m; ++i) {
    if (!(static_cast<double>(L.time(d[i])) < big)) {
      f.ls2.fail(i + 1);
      break;
    }
  }
  const double short_t = cpow(lp, -c.a / 2);
  f.ls3 = detail::prefix_sparsity(m, cpow(lp, -2 * c.b), true,
                                  detail::sparsity_factor(L.n) * cpow(lp, c.a / 2),
                                  [&](long i) { return static_cast<double>(L.time(d[i - 1])) < short_t; });
  if (!(md < cpow(lc, -c.a / 2))) f.lf1.fail(std::max<long>(m, 1));
  f.ls = f.ls1.ok && f.ls2.ok && f.ls3.ok;
  f.lf = f.lf1.ok && f.ls2.ok;
  return f;
}

// Very good / bad return sets at one level.
struct VgBLevel {
  int n = 0;
  bool base = false;               // n == n0: every index is very good
  std::set<long> vg, bad, unresolved;
  std::map<long, LandingFlags> landing;  // flags of the level-(n-1) landing of each branch

  bool is_vg(long j) const { return base || vg.count(j) > 0; }
  bool is_bad(long j) const { return bad.count(j) > 0; }
};

// LE1, LE2 (bad moments counted as in the caption) on top of LS.
inline void add_LE(LandingFlags& f, const LevelData& L, const std::vector<long>& d, const ExponentConstants& c,
                   const VgBLevel& vb) {
  detail::require_levels(L);
  const double lc = *L.ln_c, lp = *L.ln_c_prev;
  const long m = static_cast<long>(d.size());
  const double fac = detail::sparsity_factor(L.n);
  f.le1 = detail::prefix_sparsity(m, cpow(lp, -2 * c.b), false, fac * cpow(lp, c.a * c.a),
                                  [&](long i) { return !vb.is_vg(d[i - 1]); });
  f.le2 = detail::prefix_sparsity(m, cpow(lc, -1.0 / L.n), false, fac * cpow(lp, static_cast<double>(L.n)),
                                  [&](long i) { return vb.is_bad(d[i - 1]); });
  f.le = f.ls && f.le1->ok && f.le2->ok;
}

// LC1-LC5 on top of LE.
inline LandingFlags classify_landing_LC(const LevelData& L, const std::vector<long>& d, const ExponentConstants& c,
                                        const VgBLevel& vb) {
  LandingFlags f = classify_landing_LS_LF(L, d, c);
  add_LE(f, L, d, c, vb);
  const double lp = *L.ln_c_prev;
  const long m = static_cast<long>(d.size());
  const double fac = detail::sparsity_factor(L.n);
  const double nn = static_cast<double>(L.n);
  Check c1, c5;
  const double lim1 = cpow(lp, -c.a * c.a / 2);
  for (long i = 1; i <= m && static_cast<double>(i) <= lim1; ++i) {
    if (!vb.is_vg(d[i - 1])) {
      c1.fail(i);
      break;
    }
  }
  const double short_t = cpow(lp, -c.a / 2);
  Check c2 = detail::prefix_sparsity(m, short_t, true, fac * cpow(lp, c.a / 3),
                                     [&](long i) { return static_cast<double>(L.time(d[i - 1])) < short_t; });
  Check c3 = detail::prefix_sparsity(m, cpow(lp, -c.a * c.a / 4), false, fac * cpow(lp, c.a * c.a),
                                     [&](long i) { return !vb.is_vg(d[i - 1]); });
  Check c4 = detail::prefix_sparsity(m, cpow(lp, -nn / 3), true, fac * cpow(lp, nn / 6),
                                     [&](long i) { return vb.is_bad(d[i - 1]); });
  const double lim5 = cpow(lp, -nn / 2);
  for (long i = 1; i <= m && static_cast<double>(i) <= lim5; ++i) {
    if (vb.is_bad(d[i - 1])) {
      c5.fail(i);
      break;
    }
  }
  f.lc1 = c1;
  f.lc2 = c2;
  f.lc3 = c3;
  f.lc4 = c4;
  f.lc5 = c5;
  f.lc = *f.le && c1.ok && c2.ok && c3.ok && c4.ok && c5.ok;
  return f;
}

// Inductive VG/B sets for levels n0..N. `levels` must contain consecutive
// levels including n0; the result starts at n0.
inline std::vector<VgBLevel> classify_returns_VG_B(const std::vector<LevelData>& levels, int n0,
                                                   const ExponentConstants& c) {
  std::size_t start = levels.size();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].n == n0) start = i;
  }
  if (start == levels.size()) throw Error(ErrorKind::InsufficientDepth, "level n0 not available", n0);
  std::vector<VgBLevel> out;
  VgBLevel base;
  base.n = n0;
  base.base = true;
  for (const auto& [j, t] : levels[start].r) base.vg.insert(j);
  out.push_back(base);
  for (std::size_t i = start; i + 1 < levels.size(); ++i) {
    const LevelData& L = levels[i];
    const LevelData& N = levels[i + 1];
    if (N.n != L.n + 1) throw Error(ErrorKind::InsufficientDepth, "levels are not consecutive", N.n);
    const VgBLevel& prev = out.back();
    VgBLevel cur;
    cur.n = N.n;
    const double ln_vg = static_cast<double>(L.n) * static_cast<double>(L.n) * *L.ln_c;
    for (const auto& [j, t] : N.r) {
      auto it = N.parent_address.find(j);
      if (it == N.parent_address.end() || !it->second) {
        cur.unresolved.insert(j);
        continue;
      }
      const std::vector<long>& d = *it->second;
      LandingFlags f = classify_landing_LS_LF(L, d, c);
      add_LE(f, L, d, c, prev);
      cur.landing[j] = f;
      auto dist = N.ln_dist_ratio.find(j);
      const bool far = dist != N.ln_dist_ratio.end() && dist->second > ln_vg;
      if (*f.le && far) {
        cur.vg.insert(j);
      } else if (!f.lf) {
        cur.bad.insert(j);
      }
    }
    out.push_back(std::move(cur));
  }
  return out;
}

// ---------------------------------------------------------------------------
// derivative growth along branches

namespace detail {

inline void add_log_mig(Real& acc, const Interval& x) {
  Real t = x.mig();
  mpfr_mul_2ui(t.raw(), t.raw(), 1, MPFR_RNDD);
  mpfr_log(t.raw(), t.raw(), MPFR_RNDD);
  mpfr_add(acc.raw(), acc.raw(), t.raw(), MPFR_RNDD);
}

// prefix[k] >= inf over the cell of ln|Df^k|, or nullopt if the enclosure touches 0
inline std::optional<std::vector<double>> cell_profile(const MapParam& m, Interval x, long r) {
  std::vector<double> out(r + 1, 0.0);
  Real acc(0L, m.precision());
  for (long k = 0; k < r; ++k) {
    if (x.contains_zero()) return std::nullopt;
    add_log_mig(acc, x);
    out[k + 1] = mpfr_get_d(acc.raw(), MPFR_RNDD);
    x = m.f(x);
  }
  return out;
}

inline void profile_rec(const MapParam& m, const Interval& x, long r, int depth, std::vector<double>& best) {
  auto p = cell_profile(m, x, r);
  if (!p) {
    if (depth <= 0) {
      for (long k = 1; k <= r; ++k) best[k] = -INFINITY;
      return;
    }
    const Real mid = x.mid();
    profile_rec(m, Interval(x.lo(), mid), r, depth - 1, best);
    profile_rec(m, Interval(mid, x.hi()), r, depth - 1, best);
    return;
  }
  for (long k = 0; k <= r; ++k) best[k] = std::min(best[k], (*p)[k]);
}

}  // namespace detail

// Lower bounds of inf over the branch domain of ln|Df^k|, k = 0..r.
inline std::vector<double> derivative_profile(const ReturnSystem& rs, const ReturnBranch& br, int cells = 4,
                                              int refine_depth = 6) {
  const MapParam& m = rs.param();
  const long r = br.return_time;
  std::vector<double> best(r + 1, INFINITY);
  best[0] = 0;
  const Real lo = br.domain.lo(), hi = br.domain.hi();
  for (int c = 0; c < cells; ++c) {
    const Real a = lo + (hi - lo) * static_cast<long>(c) / static_cast<long>(cells);
    const Real b = c + 1 == cells ? hi : lo + (hi - lo) * static_cast<long>(c + 1) / static_cast<long>(cells);
    detail::profile_rec(m, Interval(a, b), r, refine_depth, best);
  }
  best[0] = 0;
  return best;
}

struct LambdaReport {
  int level = 0;
  std::map<long, double> lambda_j;  // lower bounds
  double lambda = INFINITY;         // min over j
  long argmin = 0;
  std::map<long, std::vector<double>> profiles;
};

inline LambdaReport lambda_exponents(const ReturnSystem& rs, int cells = 4, bool keep_profiles = false,
                                     int threads = 1) {
  LambdaReport rep;
  rep.level = rs.level;
  const long nr = rs.right_count();
  std::vector<std::vector<double>> prof(nr);
  parallel_for(static_cast<std::size_t>(nr), threads,
               [&](std::size_t i) { prof[i] = derivative_profile(rs, rs.branch(static_cast<long>(i) + 1), cells); });
  // |Df^k| is even, so the mirrored branch has the same profile
  for (long j = 1; j <= nr; ++j) {
    const double lam = prof[j - 1].back() / static_cast<double>(rs.branch(j).return_time);
    for (long s : {j, -j}) {
      rep.lambda_j[s] = lam;
      if (keep_profiles) rep.profiles[s] = prof[j - 1];
    }
    if (lam < rep.lambda) {
      rep.lambda = lam;
      rep.argmin = j;
    }
  }
  return rep;
}

struct GFlags {
  bool g1 = false;
  std::optional<bool> g2;   // nothing at level 1
  long g2_witness = 0;      // first failing k
  double lambda_j = 0;
};

inline double lambda_of(const LevelData& L, long j) {
  auto it = L.log_deriv.find(j);
  if (it == L.log_deriv.end()) throw Error(ErrorKind::MissingLevelData, "no derivative profile for branch", j);
  return it->second.back() / static_cast<double>(L.time(j));
}

inline double lambda_min(const LevelData& L) {
  double lam = INFINITY;
  for (const auto& [j, p] : L.log_deriv) lam = std::min(lam, lambda_of(L, j));
  return lam;
}

// G1/G2 for every branch of level L, relative to lambda_{n0}.
inline std::map<long, GFlags> check_G(const LevelData& L, int n0, double lambda_n0, const ExponentConstants& c) {
  if (L.n < n0) throw Error(ErrorKind::InsufficientDepth, "level below n0", L.n);
  std::map<long, GFlags> out;
  const double n = L.n;
  const double g1_bound = lambda_n0 * (1 + std::ldexp(1.0, n0 - L.n)) / 2;
  const bool g2_ok = L.n >= 2 && L.ln_c && L.ln_c_prev;
  double k_lo = 0, g2_bound = 0;
  if (g2_ok) {
    k_lo = cpow(*L.ln_c_prev, -3.0 / (n - 1));
    g2_bound = lambda_n0 * (1 + std::pow(2.0, n0 - n + 0.5)) / 2 - cpow(*L.ln_c, 2.0 / (n - 1));
  }
  (void)c;
  for (const auto& [j, prof] : L.log_deriv) {
    GFlags g;
    const long r = L.time(j);
    g.lambda_j = prof.back() / static_cast<double>(r);
    g.g1 = g.lambda_j >= g1_bound;
    if (g2_ok) {
      bool ok = true;
      for (long k = std::max<long>(1, static_cast<long>(std::ceil(k_lo))); k <= r; ++k) {
        if (!(prof[k] / static_cast<double>(k) >= g2_bound)) {
          ok = false;
          g.g2_witness = k;
          break;
        }
      }
      g.g2 = ok;
    }
    out[j] = g;
  }
  return out;
}

// ---------------------------------------------------------------------------
// extraction from a computed nest

inline LevelData level_data(const std::vector<ReturnSystem>& levels, std::size_t i, bool with_profiles = false,
                            int cells = 4, int threads = 1) {
  const ReturnSystem& rs = levels.at(i);
  LevelData L;
  L.n = rs.level;
  if (rs.c) L.ln_c = log(*rs.c).to_double();
  if (i > 0 && levels[i - 1].c) L.ln_c_prev = log(*levels[i - 1].c).to_double();
  L.v = rs.v;
  L.tau = rs.tau;
  if (rs.critical_address) L.critical_address = rs.critical_address->entries();
  const Real len = rs.p() * 2L;
  for (std::size_t k = 0; k < rs.branches.size(); ++k) {
    const ReturnBranch& b = rs.branches[k];
    L.r[b.index] = b.return_time;
    const Real dist = b.index > 0 ? b.domain.lo() : -b.domain.hi();
    L.ln_dist_ratio[b.index] = log(dist / len).to_double();
    if (k < rs.parent_address.size()) {
      const auto& pa = rs.parent_address[k];
      L.parent_address[b.index] = pa ? std::optional<std::vector<long>>(pa->entries()) : std::nullopt;
    }
  }
  if (with_profiles) {
    LambdaReport lr = lambda_exponents(rs, cells, true, threads);
    L.log_deriv = std::move(lr.profiles);
  }
  return L;
}

// ---------------------------------------------------------------------------
// partial-time accounting for a very good return

struct PartialTime {
  long k = 0;
  long m_k = 0;     // completed full returns
  long i_k = 0;     // time outside completed full returns
  long h_k = 0;     // completed bad returns
  long l_k = 0;     // completed returns that are neither very good nor bad
  long beta_k = 0;  // completed very good returns
  bool identity() const { return i_k + h_k + l_k + beta_k == k; }
};

// Time split at truncation k of the orbit v_n, r(j_1), r(j_2), ... through d.
inline PartialTime partial_time_accounting(long v_n, const std::vector<long>& d, const LevelData& L,
                                           const VgBLevel& vb, long k) {
  PartialTime pt;
  pt.k = k;
  // completed returns from the cumulative sums
  long t = v_n;
  for (long j : d) {
    const long r = L.time(j);
    if (t + r > k) break;
    t += r;
    ++pt.m_k;
    if (vb.is_vg(j)) {
      pt.beta_k += r;
    } else if (vb.is_bad(j)) {
      pt.h_k += r;
    } else {
      pt.l_k += r;
    }
  }
  // time outside completed returns, counted one iterate at a time
  long outside = 0, run = 0, left = v_n, seg = -1;
  for (long step = 0; step < k; ++step) {
    if (left == 0) {
      ++seg;
      left = seg < static_cast<long>(d.size()) ? L.time(d[seg]) : LONG_MAX;
      run = 0;
    }
    --left;
    if (seg < 0) {
      ++outside;
    } else {
      ++run;
      if (left == 0) run = 0;
    }
  }
  outside += run;
  pt.i_k = outside;
  return pt;
}

// Finitely checkable consequences on computed data: LC within LE within LS
// for every classified landing, the partial-time identity at every k before
// a very good return completes, and m < r_{n+1}(j) for very good j.
struct SkeletonReport {
  long landings = 0;
  long containment_violations = 0;
  long vg_branches = 0;
  long identity_checks = 0;
  long identity_violations = 0;
  long time_bound_violations = 0;
  double max_time_ratio = 0;  // max over very good j of r_{n+1}(j) / (m c_{n-1}^{-4b}), when c_{n-1} is known
};

inline SkeletonReport skeleton_checks(const std::vector<LevelData>& levels, const std::vector<VgBLevel>& sets,
                                      const ExponentConstants& c) {
  SkeletonReport rep;
  for (std::size_t s = 1; s < sets.size(); ++s) {
    const VgBLevel& prev = sets[s - 1];
    const VgBLevel& cur = sets[s];
    const LevelData* L = nullptr;
    const LevelData* N = nullptr;
    for (const auto& l : levels) {
      if (l.n == prev.n) L = &l;
      if (l.n == cur.n) N = &l;
    }
    if (!L || !N) continue;
    for (const auto& [j, t] : N->r) {
      auto it = N->parent_address.find(j);
      if (it == N->parent_address.end() || !it->second) continue;
      const std::vector<long>& d = *it->second;
      const LandingFlags f = classify_landing_LC(*L, d, c, prev);
      ++rep.landings;
      if ((*f.lc && !*f.le) || (*f.le && !f.ls)) ++rep.containment_violations;
      if (!cur.is_vg(j) || !L->v) continue;
      ++rep.vg_branches;
      const long m = static_cast<long>(d.size());
      if (!(m < t)) ++rep.time_bound_violations;
      if (L->ln_c_prev) {
        rep.max_time_ratio = std::max(rep.max_time_ratio,
                                      static_cast<double>(t) / (static_cast<double>(m) * cpow(*L->ln_c_prev, -4 * c.b)));
      }
      for (long k = 0; k < t; ++k) {
        ++rep.identity_checks;
        if (!partial_time_accounting(*L->v, d, *L, prev, k).identity()) ++rep.identity_violations;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// time statistics

struct TimeSample {
  long k = 0;
  CapacityBound bound;
};

struct TimeStats {
  int level = 0;
  double gamma_A = 1, gamma_B = 1;
  std::vector<TimeSample> A;  // capacity of {r_n >= k}, constant on (previous k, k]
  std::vector<TimeSample> B;  // capacity of {l_n > k}, constant on [k, next k)
  bool A_tail_partial = false;  // branches beyond the time budget are unknown
  long A_certified_through = 0;
  long B_complete_through = 0;  // every landing with time <= this was enumerated
  long landing_components = 0;
  std::optional<double> zeta;
  std::optional<double> alpha;
  double zeta_cap = 0;  // c_{n-1} (|T_1| / |I| at level 1)
};

struct TimeStatsOptions {
  int effort = 1;
  long sample_budget = 12;       // A and B samples each
  int threads = 1;
  long landing_budget = 20000;   // landing components enumerated for B
  long landing_time_cap = 0;     // 0: 4 times the largest return time
  std::optional<double> gamma_override;
};

struct LandingPiece {
  Interval core;
  long l = 0;
  long first = 0;  // first entry of the address, 0 for the central domain
};

struct LandingEnumeration {
  std::vector<LandingPiece> pieces;  // increasing landing time
  long complete_through = 0;
  bool precision_limited = false;
};

// Landing domains C^d in increasing order of l_n(d), by a lazy best-first
// merge over branches sorted by time.
inline LandingEnumeration enumerate_landings(const ReturnSystem& rs, long time_cap, long budget) {
  LandingEnumeration out;
  if (!rs.central) throw Error(ErrorKind::MissingLevelData, "level has no central branch");
  std::vector<const ReturnBranch*> by_time;
  for (const auto& b : rs.branches) by_time.push_back(&b);
  std::stable_sort(by_time.begin(), by_time.end(),
                   [](const ReturnBranch* x, const ReturnBranch* y) { return x->return_time < y->return_time; });
  struct Node {
    Segment seg;
    long l;
    long first;
  };
  std::vector<Node> nodes;
  nodes.push_back({central_segment(rs), 0, 0});
  out.pieces.push_back({nodes[0].seg.value(), 0, 0});
  using Item = std::tuple<long, long, long>;  // l, parent node, rank in by_time
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  auto push_child = [&](long parent, long rank) {
    if (rank < static_cast<long>(by_time.size())) {
      const long l = nodes[parent].l + by_time[rank]->return_time;
      if (l <= time_cap) pq.emplace(l, parent, rank);
    }
  };
  push_child(0, 0);
  out.complete_through = time_cap;
  while (!pq.empty()) {
    auto [l, parent, rank] = pq.top();
    if (static_cast<long>(out.pieces.size()) >= budget) {
      out.complete_through = l - 1;
      break;
    }
    pq.pop();
    push_child(parent, rank + 1);
    const ReturnBranch& br = *by_time[rank];
    Segment s = pullback_through(rs, br, nodes[parent].seg);
    const Real slack = s.width() * pow2(-32, rs.param().precision());
    if (!(s.lo.width() <= slack && s.hi.width() <= slack) || !(s.width().sign() > 0)) {
      out.precision_limited = true;
      out.complete_through = l - 1;
      break;
    }
    nodes.push_back({s, l, br.index});
    out.pieces.push_back({s.value(), l, br.index});
    push_child(static_cast<long>(nodes.size()) - 1, 0);
  }
  std::stable_sort(out.pieces.begin(), out.pieces.end(),
                   [](const LandingPiece& x, const LandingPiece& y) { return x.l < y.l; });
  return out;
}

namespace detail {

inline std::vector<long> pick_samples(std::vector<long> ks, long budget) {
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (budget <= 0 || static_cast<long>(ks.size()) <= budget) return ks;
  std::vector<long> out;
  const long n = static_cast<long>(ks.size());
  for (long i = 0; i < budget; ++i) out.push_back(ks[(i * (n - 1)) / std::max<long>(budget - 1, 1)]);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// complement of sorted disjoint pieces inside amb
inline std::vector<Interval> complement(const Interval& amb, std::vector<Interval> pieces) {
  std::sort(pieces.begin(), pieces.end(), [](const Interval& x, const Interval& y) { return x.lo() < y.lo(); });
  std::vector<Interval> out;
  Real cur = amb.lo();
  for (const auto& p : pieces) {
    if (cur < p.lo()) out.emplace_back(cur, p.lo());
    cur = max(cur, p.hi());
  }
  if (cur < amb.hi()) out.emplace_back(cur, amb.hi());
  return out;
}

}  // namespace detail

// Largest zeta on a 1024-point logarithmic grid below cap with A(k) <= e^{-zeta k}
// for every sampled k > 1/zeta.
inline std::optional<double> fit_zeta(const std::vector<TimeSample>& A, double cap) {
  if (!(cap > 0)) return std::nullopt;
  const double span = 40 * std::log(10.0);  // down to cap * 1e-40
  for (int i = 1; i <= 1024; ++i) {
    const double zeta = cap * std::exp(-span * i / 1024.0);
    bool ok = true;
    for (const auto& s : A) {
      if (static_cast<double>(s.k) <= 1 / zeta) continue;
      // ln A <= -zeta k, compared in logs to survive underflow
      const double ub = s.bound.upper.to_double();
      if (ub > 0 && std::log(ub) > -zeta * static_cast<double>(s.k)) {
        ok = false;
        break;
      }
    }
    if (ok) return zeta;
  }
  return std::nullopt;
}

inline TimeStats time_statistics(const ReturnSystem& rs, const ExponentConstants& c, const TimeStatsOptions& o = {},
                                 std::optional<double> c_prev = std::nullopt) {
  TimeStats ts;
  ts.level = rs.level;
  ts.gamma_A = o.gamma_override ? *o.gamma_override : c.gamma_n(rs.level);
  ts.gamma_B = o.gamma_override ? *o.gamma_override : c.gamma_tilde_n(rs.level);
  const mpfr_prec_t prec = rs.param().precision();
  if (c_prev) {
    ts.zeta_cap = *c_prev;
  } else {
    ts.zeta_cap = (rs.p() / rs.param().beta).to_double();
  }

  // A_n(k)
  struct Dom {
    Interval d;
    long t;  // -1: unknown, beyond the budget
  };
  std::vector<Dom> doms;
  long max_r = 0;
  for (const auto& b : rs.branches) {
    doms.push_back({b.domain, b.return_time});
    max_r = std::max<long>(max_r, b.return_time);
  }
  if (rs.central) doms.push_back({rs.central->domain, rs.v ? *rs.v : -1L});
  for (const auto& u : rs.uncovered) doms.push_back({u, -1});
  ts.A_tail_partial = !rs.uncovered.empty() || (rs.central && !rs.v);
  ts.A_certified_through = ts.A_tail_partial ? rs.time_budget : LONG_MAX;
  std::vector<long> ks;
  for (const auto& d : doms) {
    if (d.t > 0) ks.push_back(d.t);
  }
  ks.push_back(1);
  const long top = std::max<long>(max_r, rs.v.value_or(0)) + 1;
  ks.push_back(top);
  const std::vector<long> aks = detail::pick_samples(ks, o.sample_budget);
  ts.A.resize(aks.size());
  parallel_for(aks.size(), o.threads, [&](std::size_t s) {
    std::vector<Interval> parts;
    for (const auto& d : doms) {
      if (d.t < 0 || d.t >= aks[s]) parts.push_back(d.d);
    }
    ts.A[s] = {aks[s], capacity_bounds(IntervalSet(rs.interval, parts), ts.gamma_A, o.effort, prec)};
  });
  ts.zeta = fit_zeta(ts.A, ts.zeta_cap);

  // B_n(k)
  if (rs.central) {
    const long cap = o.landing_time_cap > 0 ? o.landing_time_cap : 4 * std::max<long>(max_r, 1);
    LandingEnumeration le = enumerate_landings(rs, cap, o.landing_budget);
    ts.B_complete_through = le.complete_through;
    ts.landing_components = static_cast<long>(le.pieces.size());
    std::vector<long> ls;
    for (const auto& p : le.pieces) {
      if (p.l <= le.complete_through) ls.push_back(p.l);
    }
    const std::vector<long> bks = detail::pick_samples(ls, o.sample_budget);
    ts.B.resize(bks.size());
    parallel_for(bks.size(), o.threads, [&](std::size_t s) {
      std::vector<Interval> landed;
      for (const auto& p : le.pieces) {
        if (p.l <= bks[s]) landed.push_back(p.core);
      }
      ts.B[s] = {bks[s], capacity_bounds(IntervalSet(rs.interval, detail::complement(rs.interval, landed)),
                                         ts.gamma_B, o.effort, prec)};
    });
  }
  return ts;
}

// Time statistics for every level, with alpha_n = min_{m <= n} zeta_m.
inline std::vector<TimeStats> time_statistics_all(const std::vector<ReturnSystem>& levels, const ExponentConstants& c,
                                                  const TimeStatsOptions& o = {}) {
  std::vector<TimeStats> out;
  std::optional<double> alpha;
  bool alpha_lost = false;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::optional<double> cp;
    if (i > 0 && levels[i - 1].c) cp = levels[i - 1].c->to_double();
    if (i > 0 && !cp) break;
    TimeStats ts = time_statistics(levels[i], c, o, cp);
    if (!ts.zeta) alpha_lost = true;
    if (!alpha_lost) alpha = alpha ? std::min(*alpha, *ts.zeta) : *ts.zeta;
    if (!alpha_lost) ts.alpha = alpha;
    out.push_back(std::move(ts));
  }
  return out;
}

// ---------------------------------------------------------------------------
// combinatorial tail bound

struct TreeCapacity {
  double binomial = 1;  // min(1, C(m,k) (2^n q)^k)
  double stirling = 1;  // min(1, (3/q')^{q'm} (2^n q)^k), q' = k/m
};

inline TreeCapacity tree_capacity_bound(double q, long m, long k, int n) {
  if (!(q >= 0 && q <= 1) || k < 0 || k > m || m < 0) {
    throw Error(ErrorKind::PreconditionViolated, "need 0 <= q <= 1 and 0 <= k <= m");
  }
  TreeCapacity t;
  if (k == 0) return t;
  constexpr mpfr_prec_t P = 128;
  mpz_t bin;
  mpz_init(bin);
  mpz_bin_uiui(bin, static_cast<unsigned long>(m), static_cast<unsigned long>(k));
  Real C(P), base(P), pw(P), out(P);
  mpfr_set_z(C.raw(), bin, MPFR_RNDU);
  mpz_clear(bin);
  mpfr_set_d(base.raw(), q, MPFR_RNDU);
  mpfr_mul_2si(base.raw(), base.raw(), n, MPFR_RNDU);
  mpfr_pow_ui(pw.raw(), base.raw(), static_cast<unsigned long>(k), MPFR_RNDU);
  mpfr_mul(out.raw(), C.raw(), pw.raw(), MPFR_RNDU);
  t.binomial = std::min(1.0, mpfr_get_d(out.raw(), MPFR_RNDU));
  // (3 m / k)^k bounds the binomial coefficient
  Real s(P);
  mpfr_set_si(s.raw(), 3 * m, MPFR_RNDU);
  mpfr_div_si(s.raw(), s.raw(), k, MPFR_RNDU);
  mpfr_pow_ui(s.raw(), s.raw(), static_cast<unsigned long>(k), MPFR_RNDU);
  mpfr_mul(s.raw(), s.raw(), pw.raw(), MPFR_RNDU);
  t.stirling = std::min(1.0, mpfr_get_d(s.raw(), MPFR_RNDU));
  return t;
}

// ---------------------------------------------------------------------------
// Borel-Cantelli harness

// Nested dyadic cells J_n(x) of [0,1); Q_n meets each generation-n cell in a
// window of relative length q_n at a pseudo-random offset.
struct SyntheticNestedSystem {
  std::vector<double> q;     // q[n-1] = q_n, n = 1..horizon
  int tail_start = 0;        // "infinitely often" = in some Q_n with n >= tail_start; 0: horizon/2
  std::uint64_t seed = 1;

  int horizon() const { return static_cast<int>(q.size()); }
  static SyntheticNestedSystem constant(double qn, int horizon, std::uint64_t seed = 1) {
    return {std::vector<double>(horizon, qn), 0, seed};
  }
  static SyntheticNestedSystem geometric(int horizon, std::uint64_t seed = 1) {
    std::vector<double> q;
    for (int n = 1; n <= horizon; ++n) q.push_back(std::ldexp(1.0, -n));
    return {q, 0, seed};
  }
  bool in_Q(std::uint64_t x, int n) const {
    const double qn = q[n - 1];
    if (qn <= 0) return false;
    if (qn >= 1) return true;
    const std::uint64_t cell = x >> (64 - n);
    const double pos = to_unit(x << n);
    const double off = to_unit(counter_draw(seed, 0x51ULL + static_cast<std::uint64_t>(n), cell));
    double d = pos - off;
    if (d < 0) d += 1;
    return d < qn;
  }
};

struct MeasureEstimate {
  double estimate = 0;
  double radius = 0;  // 95% binomial half-width
  long hits = 0;
  long trials = 0;
  int horizon = 0;
  int tail_start = 0;
  std::uint64_t seed = 0;
};

inline MeasureEstimate borel_cantelli_harness(const SyntheticNestedSystem& sys, long trials, int threads = 1) {
  if (sys.horizon() < 1 || sys.horizon() > 60) throw Error(ErrorKind::PreconditionViolated, "horizon in 1..60");
  const int tail = sys.tail_start > 0 ? sys.tail_start : std::max(1, sys.horizon() / 2);
  constexpr long kChunk = 4096;
  const long chunks = (trials + kChunk - 1) / kChunk;
  std::vector<long> hits(static_cast<std::size_t>(chunks), 0);
  parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t ci) {
    long h = 0;
    const long end = std::min<long>(trials, (static_cast<long>(ci) + 1) * kChunk);
    for (long t = static_cast<long>(ci) * kChunk; t < end; ++t) {
      const std::uint64_t x = counter_draw(sys.seed, 0xB0C0ULL, static_cast<std::uint64_t>(t));
      for (int n = tail; n <= sys.horizon(); ++n) {
        if (sys.in_Q(x, n)) {
          ++h;
          break;
        }
      }
    }
    hits[ci] = h;
  });
  MeasureEstimate e;
  for (long h : hits) e.hits += h;
  e.trials = trials;
  e.horizon = sys.horizon();
  e.tail_start = tail;
  e.seed = sys.seed;
  if (trials > 0) {
    const double p = static_cast<double>(e.hits) / static_cast<double>(trials);
    e.estimate = p;
    e.radius = (e.hits == 0 || e.hits == trials) ? 3.0 / static_cast<double>(trials)
                                                   : 1.96 * std::sqrt(p * (1 - p) / static_cast<double>(trials));
  }
  return e;
}

// ---------------------------------------------------------------------------
// large-times checklist for one level

enum class ItemStatus { Pass, Fail, NotEvaluable };

inline std::string to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::Pass: return "pass";
    case ItemStatus::Fail: return "fail";
    case ItemStatus::NotEvaluable: return "not-evaluable";
  }
  return "?";
}

struct ChecklistItem {
  std::string name;
  ItemStatus status = ItemStatus::NotEvaluable;
  double lower = 0, upper = 0;  // enclosure of the measured quantity
  double bound = 0;             // claimed strict upper bound (as ln for the exponential items)
  bool log_scale = false;
  std::string note;
};

struct ChecklistOptions {
  double s_small = -1;  // exponent for the short-time items; default a/2
  double s_large = -1;  // exponent for the long-time items; default 2b
  int effort = 1;
  long landing_budget = 5000;
  long landing_time_cap = 4096;
};

namespace detail {

inline ChecklistItem decide(std::string name, double lo, double hi, double bound, bool log_scale) {
  ChecklistItem it;
  it.name = std::move(name);
  it.lower = lo;
  it.upper = hi;
  it.bound = bound;
  it.log_scale = log_scale;
  const double l = log_scale ? std::log(lo) : lo, h = log_scale ? std::log(hi) : hi;
  if (h < bound) {
    it.status = ItemStatus::Pass;
  } else if (l >= bound) {
    it.status = ItemStatus::Fail;
  }
  return it;
}

inline ChecklistItem unavailable(std::string name, std::string why) {
  ChecklistItem it;
  it.name = std::move(name);
  it.note = std::move(why);
  return it;
}

inline double cap_upper(const Interval& amb, const std::vector<Interval>& parts, double gamma, int effort,
                        mpfr_prec_t prec) {
  return capacity_bounds(IntervalSet(amb, parts), gamma, effort, prec).upper.to_double();
}

inline double cap_lower(const Interval& amb, const std::vector<Interval>& parts, double gamma, int effort,
                        mpfr_prec_t prec) {
  return capacity_bounds(IntervalSet(amb, parts), gamma, effort, prec).lower.to_double();
}

}  // namespace detail

inline std::vector<ChecklistItem> large_times_checklist(const std::vector<ReturnSystem>& levels, std::size_t i,
                                                        const ExponentConstants& pc, const ChecklistOptions& o = {}) {
  std::vector<ChecklistItem> out;
  if (i >= levels.size()) {
    for (const char* name : {"landing-short", "landing-long", "landing-short-tau", "landing-long-tau", "return-short",
                             "return-long", "r-tau-window", "v-window", "scale-rate"}) {
      out.push_back(detail::unavailable(name, "level not built"));
    }
    return out;
  }
  const ReturnSystem& rs = levels[i];
  const double s1 = o.s_small > 0 ? o.s_small : pc.a / 2;
  const double s2 = o.s_large > 0 ? o.s_large : 2 * pc.b;
  const int n = rs.level;
  const mpfr_prec_t prec = rs.param().precision();
  const double gA = pc.gamma_n(n), gB = pc.gamma_tilde_n(n);
  std::optional<double> ln_c, ln_cp;
  if (rs.c) ln_c = log(*rs.c).to_double();
  if (i > 0 && levels[i - 1].c) ln_cp = log(*levels[i - 1].c).to_double();
  const bool has_tau = rs.tau && *rs.tau != 0;

  // landing times
  const char* lnames[4] = {"landing-short", "landing-short-tau", "landing-long", "landing-long-tau"};
  if (!ln_c || !rs.central) {
    for (const char* nm : lnames) out.push_back(detail::unavailable(nm, "c_n unknown"));
  } else {
    const LandingEnumeration le = enumerate_landings(rs, o.landing_time_cap, o.landing_budget);
    const double short_thr = cpow(*ln_c, -s1);
    const double long_thr = cpow(*ln_c, -s2);
    for (int local = 0; local < 2; ++local) {
      const std::string suffix = local ? "-tau" : "";
      if (local && !has_tau) {
        const std::string why = rs.tau ? "R_n(0) returns centrally" : "tau_n unknown";
        out.push_back(detail::unavailable("landing-short" + suffix, why));
        out.push_back(detail::unavailable("landing-long" + suffix, why));
        continue;
      }
      const Interval amb = local ? rs.branch(*rs.tau).domain : rs.interval;
      auto keep = [&](const LandingPiece& p) { return !local || p.first == *rs.tau; };
      // {l < thr}: needs every landing with time below thr
      if (static_cast<double>(le.complete_through) + 1 < short_thr) {
        out.push_back(detail::unavailable("landing-short" + suffix, "landing enumeration stops below c_n^{-s}"));
      } else {
        std::vector<Interval> parts;
        for (const auto& p : le.pieces) {
          if (keep(p) && static_cast<double>(p.l) < short_thr) parts.push_back(p.core);
        }
        const auto b = capacity_bounds(IntervalSet(amb, parts), gB, o.effort, prec);
        out.push_back(detail::decide("landing-short" + suffix, b.lower.to_double(), b.upper.to_double(),
                                     cpow(*ln_c, pc.a - s1), false));
      }
      // {l > thr} is inside {l > K} for K <= thr
      const long K = static_cast<long>(std::min<double>(static_cast<double>(le.complete_through), long_thr));
      std::vector<Interval> landed, landed_all;
      for (const auto& p : le.pieces) {
        if (!keep(p)) continue;
        if (p.l <= K) landed.push_back(p.core);
        if (static_cast<double>(p.l) <= long_thr) landed_all.push_back(p.core);
      }
      const auto cl = detail::complement(amb, landed);
      const double hi = detail::cap_upper(amb, cl, gB, o.effort, prec);
      double lo = 0;
      if (static_cast<double>(le.complete_through) >= long_thr) {
        lo = detail::cap_lower(amb, detail::complement(amb, landed_all), gB, o.effort, prec);
      }
      // the claim is ln p < -c_n^{b-s}
      auto it = detail::decide("landing-long" + suffix, lo, hi, -cpow(*ln_c, pc.b - s2), true);
      if (lo == 0 && it.status == ItemStatus::NotEvaluable) it.note = "enumeration stops below c_n^{-s}";
      out.push_back(it);
    }
  }

  // return times
  if (!ln_cp) {
    out.push_back(detail::unavailable("return-short", "c_{n-1} unknown"));
    out.push_back(detail::unavailable("return-long", "c_{n-1} unknown"));
  } else {
    const double short_thr = cpow(*ln_cp, -s1), long_thr = cpow(*ln_cp, -s2);
    const double T = rs.time_budget;
    std::vector<Interval> sure_short, maybe, sure_long, maybe_long;
    auto add = [&](const Interval& d, std::optional<long> t) {
      if (!t) {
        // time unknown, beyond the budget
        if (T + 1 >= short_thr) {
          ;  // provably long enough to be outside the short set
        } else {
          maybe.push_back(d);
        }
        (T >= long_thr ? sure_long : maybe_long).push_back(d);
        return;
      }
      if (static_cast<double>(*t) < short_thr) sure_short.push_back(d);
      if (static_cast<double>(*t) > long_thr) sure_long.push_back(d);
    };
    for (const auto& b : rs.branches) add(b.domain, b.return_time);
    if (rs.central) add(rs.central->domain, rs.v);
    for (const auto& u : rs.uncovered) add(u, std::nullopt);
    auto join = [](std::vector<Interval> a, const std::vector<Interval>& b) {
      a.insert(a.end(), b.begin(), b.end());
      return a;
    };
    const double slo = detail::cap_lower(rs.interval, sure_short, gA, o.effort, prec);
    const double shi = detail::cap_upper(rs.interval, join(sure_short, maybe), gA, o.effort, prec);
    out.push_back(detail::decide("return-short", slo, shi, cpow(*ln_cp, pc.a - s1), false));
    const double llo = detail::cap_lower(rs.interval, sure_long, gA, o.effort, prec);
    const double lhi = detail::cap_upper(rs.interval, join(sure_long, maybe_long), gA, o.effort, prec);
    out.push_back(detail::decide("return-long", llo, lhi, -cpow(*ln_cp, pc.b - s2), true));
  }

  // the two critical times sit in (c_{n-1}^{-a}, c_{n-1}^{-b})
  auto window = [&](std::string name, std::optional<long> t) {
    if (!ln_cp || !t) {
      out.push_back(detail::unavailable(std::move(name), !ln_cp ? "c_{n-1} unknown" : "time unknown"));
      return;
    }
    ChecklistItem it;
    it.name = std::move(name);
    it.lower = it.upper = static_cast<double>(*t);
    it.bound = cpow(*ln_cp, -pc.b);
    const bool ok = cpow(*ln_cp, -pc.a) < it.lower && it.lower < it.bound;
    it.status = ok ? ItemStatus::Pass : ItemStatus::Fail;
    out.push_back(it);
  };
  std::optional<long> r_tau;
  if (has_tau) r_tau = rs.branch(*rs.tau).return_time;
  window("r-tau-window", has_tau ? r_tau : std::nullopt);
  window("v-window", rs.v);

  // decay rate of the scales
  if (ln_c && ln_cp) {
    ChecklistItem it;
    it.name = "scale-rate";
    it.lower = it.upper = std::log(-*ln_c) / std::log(-*ln_cp);
    it.bound = pc.b;
    it.status = (pc.a < it.lower && it.lower < pc.b) ? ItemStatus::Pass : ItemStatus::Fail;
    if (!(-*ln_cp > 1)) {
      it.status = ItemStatus::NotEvaluable;
      it.note = "c_{n-1} > 1/e";
    }
    out.push_back(it);
  } else {
    out.push_back(detail::unavailable("scale-rate", "needs c_n and c_{n-1}"));
  }
  return out;
}

}  // namespace qnest
