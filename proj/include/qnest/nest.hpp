#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qnest/dynamics.hpp"
#include "qnest/errors.hpp"
#include "qnest/real.hpp"
#include "qnest/tree_address.hpp"

namespace qnest {

struct NestBudgets {
  int time_budget = 24;         // level 1 cap; deeper levels allow v_{n-1} + time_budget
  int count_budget = 4096;      // breadth-first sweep cap; critical-path branches are always kept
  int depth = 3;
  int central_cascade_bound = 3;
  long landing_time_cap = 1L << 16;   // iterates allowed in a landing walk
  int renormalization_max_period = 64;
  int precision_retries = 1;
};

// Closed interval together with certified enclosures of its two endpoints.
struct Segment {
  Interval lo;
  Interval hi;

  Interval value() const { return {lo.mid(), hi.mid()}; }
  Real width() const { return hi.mid() - lo.mid(); }
};

struct ReturnBranch {
  long index = 0;
  Interval domain;
  Interval lo_box, hi_box;
  int return_time = 0;
  bool is_central = false;
  int orientation = 0;  // sign of Df^r on the branch, 0 for the central one
  std::vector<signed char> itinerary;  // sign of f^i on the branch (right half for the central one)
  int image_sign = 0;   // central branch: f^v(c) = image_sign * p
};

namespace detail {

struct BPoint {
  Real v;
  Interval box;
  int exact = 0;  // nonzero: value is exactly exact * p of its own level
};

// f^k(0) for all k, extended on demand; values rounded to nearest and boxes
// from outward interval iteration.
class CriticalOrbit {
 public:
  explicit CriticalOrbit(const MapParam& m) : m_(m) {
    vals_.emplace_back(m.precision());
    boxes_.emplace_back(Real(m.precision()));
  }

  BPoint at(long k) {
    std::lock_guard<std::mutex> lock(mu_);
    while (static_cast<long>(vals_.size()) <= k) {
      vals_.push_back(m_.f(vals_.back()));
      boxes_.push_back(m_.f(boxes_.back()));
    }
    return {vals_[k], boxes_[k], 0};
  }

  const MapParam& param() const { return m_; }

 private:
  MapParam m_;
  std::vector<Real> vals_;
  std::vector<Interval> boxes_;
  std::mutex mu_;
};

// Pulls y back along the inverse branches x_i = s_i sqrt(a - x_{i+1}).
inline Real pull_value(const MapParam& m, Real y, const std::vector<signed char>& s) {
  for (std::size_t i = s.size(); i-- > 0;) {
    Real t = m.a - y;
    if (t.sign() < 0) t = Real(t.precision());
    y = sqrt(t);
    if (s[i] < 0) y = -y;
  }
  return y;
}

inline Interval pull_box(const MapParam& m, Interval y, const std::vector<signed char>& s) {
  const Interval a(m.a);
  for (std::size_t i = s.size(); i-- > 0;) {
    y = (a - y).sqrt();
    if (s[i] < 0) y = -y;
  }
  return y;
}

// Geometry of one nice interval [-p, p]: boundary point and its forward orbit.
struct LevelGeometry {
  MapParam m;
  Real p;
  Interval pbox;
  // level 1: p is the fixed point, every b_d is exactly p
  bool fixed_boundary = false;
  // deeper levels: b_d for d <= v along the pullback chain, then the parent's orbit
  std::vector<BPoint> chain;
  std::shared_ptr<const LevelGeometry> parent;
  // generic fallback: forward interval orbit of p
  mutable std::vector<BPoint> forward;
  bool use_forward = false;

  BPoint boundary(long d) const {
    if (d == 0) return {p, pbox, 1};
    if (fixed_boundary) return {p, pbox, 1};
    if (use_forward) {
      while (static_cast<long>(forward.size()) <= d) {
        const BPoint& b = forward.back();
        forward.push_back({m.f(b.v), m.f(b.box), 0});
      }
      return forward[d];
    }
    // chain holds b_0 .. b_v with b_v = +-p of the parent level
    if (d < static_cast<long>(chain.size())) return chain[d];
    BPoint b = parent->boundary(d - static_cast<long>(chain.size()) + 1);
    b.exact = 0;
    return b;
  }

  Real scale() const { return p * 2L; }
};

enum class Loc { Below, OnLower, Inside, OnUpper, Above };

inline Loc locate(const LevelGeometry& g, const BPoint& y) {
  if (y.exact > 0) return Loc::OnUpper;
  if (y.exact < 0) return Loc::OnLower;
  const Interval& b = y.box;
  const Interval& p = g.pbox;
  if (b.hi() < -p.hi()) return Loc::Below;
  if (b.lo() > p.hi()) return Loc::Above;
  if (b.lo() > -p.lo() && b.hi() < p.lo()) return Loc::Inside;
  throw Error(ErrorKind::PrecisionFailure, "orbit point too close to the boundary of I_n");
}

inline void check_box(const LevelGeometry& g, const Interval& box) {
  if (box.width() > g.scale() * pow2(-32, box.precision())) {
    throw Error(ErrorKind::PrecisionFailure, "endpoint enclosure degenerated");
  }
}

struct Tag {
  bool critical = false;
  int born = 0;
  int sign = 0;
};

struct Piece {
  Real lo, hi;
  Interval lo_box, hi_box;
  Tag tlo, thi;
  int time = 0;
  int orient = 1;  // sign of Df^time on the piece
  std::vector<signed char> signs;
};

struct Discovery {
  std::vector<ReturnBranch> right;  // non-central branches with x > 0, unsorted
  std::optional<ReturnBranch> central;
  std::vector<Piece> frontier;      // unresolved pieces (x > 0)
  bool budget_exceeded = false;
};

class Discoverer {
 public:
  Discoverer(std::shared_ptr<const LevelGeometry> g, std::shared_ptr<CriticalOrbit> crit)
      : g_(std::move(g)), crit_(std::move(crit)) {}

  BPoint image(const Tag& t, int k) const {
    if (t.critical) return crit_->at(k);
    const int d = k - t.born;
    if (d == 0) {
      const Real v = t.sign > 0 ? g_->p : -g_->p;
      const Interval b = t.sign > 0 ? g_->pbox : -g_->pbox;
      return {v, b, t.sign};
    }
    return g_->boundary(d);
  }

  // Advances one piece by one iterate. Returned parts become branches in
  // `out`; parts still outside int I are pushed to `next`.
  void advance(Piece pc, Discovery& out, std::vector<Piece>& next) const {
    const MapParam& m = g_->m;
    const int k = pc.time;
    int sk = 1;
    if (k > 0) {
      const BPoint y = image(pc.thi.critical ? pc.tlo : pc.thi, k);
      sk = y.v.sign() >= 0 ? 1 : -1;
    }
    const int o = pc.orient * -sk;
    const BPoint ylo = image(pc.tlo, k + 1), yhi = image(pc.thi, k + 1);
    const Loc llo = locate(*g_, ylo), lhi = locate(*g_, yhi);
    // in y order
    const Loc low = o > 0 ? llo : lhi, high = o > 0 ? lhi : llo;
    pc.signs.push_back(static_cast<signed char>(sk));
    pc.orient = o;
    pc.time = k + 1;
    const bool overlap = low <= Loc::Inside && high >= Loc::Inside;
    if (!overlap) {
      next.push_back(std::move(pc));
      return;
    }

    // y-order endpoints and tags
    struct End {
      Real x;
      Interval box;
      Tag tag;
    };
    End elo{pc.lo, pc.lo_box, pc.tlo}, ehi{pc.hi, pc.hi_box, pc.thi};
    End ylow = o > 0 ? elo : ehi, yhigh = o > 0 ? ehi : elo;

    auto split_at = [&](int sign) {
      const Interval target = sign > 0 ? g_->pbox : -g_->pbox;
      const Real tv = sign > 0 ? g_->p : -g_->p;
      End e{pull_value(m, tv, pc.signs), pull_box(m, target, pc.signs), Tag{false, k + 1, sign}};
      check_box(*g_, e.box);
      return e;
    };

    auto make_piece = [&](const End& a, const End& b) {
      // a, b in y order; convert to x order
      const End& xl = o > 0 ? a : b;
      const End& xh = o > 0 ? b : a;
      if (!(xl.x < xh.x)) return;
      Piece q;
      q.lo = xl.x;
      q.hi = xh.x;
      q.lo_box = xl.box;
      q.hi_box = xh.box;
      q.tlo = xl.tag;
      q.thi = xh.tag;
      q.time = pc.time;
      q.orient = pc.orient;
      q.signs = pc.signs;
      next.push_back(std::move(q));
    };

    End mid_low = ylow, mid_high = yhigh;
    bool low_on_boundary = low == Loc::OnLower;
    bool high_on_boundary = high == Loc::OnUpper;
    if (low == Loc::Below) {
      End cut = split_at(-1);
      make_piece(ylow, cut);
      mid_low = cut;
      low_on_boundary = true;
    }
    if (high == Loc::Above) {
      End cut = split_at(1);
      make_piece(cut, yhigh);
      mid_high = cut;
      high_on_boundary = true;
    }

    const End& xl = o > 0 ? mid_low : mid_high;
    const End& xh = o > 0 ? mid_high : mid_low;
    if (low_on_boundary && high_on_boundary) {
      ReturnBranch br;
      br.lo_box = xl.box;
      br.hi_box = xh.box;
      br.domain = Interval(xl.x, xh.x);
      br.return_time = pc.time;
      br.orientation = o;
      br.itinerary = pc.signs;
      out.right.push_back(std::move(br));
      return;
    }
    // one end stays inside int I: it must be the critical point
    const End& inner = low_on_boundary ? mid_high : mid_low;
    const End& outer = low_on_boundary ? mid_low : mid_high;
    if (!inner.tag.critical) {
      throw Error(ErrorKind::NotNice, "boundary orbit entered the interior of I", pc.time);
    }
    ReturnBranch c;
    c.is_central = true;
    c.return_time = pc.time;
    c.itinerary = pc.signs;
    c.image_sign = low_on_boundary ? -1 : 1;
    c.hi_box = outer.box;
    c.lo_box = -outer.box;
    c.domain = Interval(-outer.x, outer.x);
    out.central = std::move(c);
  }

  // Breadth-first discovery of all branches with time <= T. The critical piece
  // is followed up to crit_time regardless of the count budget.
  Discovery run(int T, int count_budget, std::optional<long> crit_time) const {
    Discovery out;
    const MapParam& m = g_->m;
    Piece start;
    start.lo = Real(m.precision());
    start.hi = g_->p;
    start.lo_box = Interval(Real(m.precision()));
    start.hi_box = g_->pbox;
    start.tlo = Tag{true, 0, 0};
    start.thi = Tag{false, 0, 1};
    std::vector<Piece> cur{std::move(start)}, next;
    const std::size_t live_cap = static_cast<std::size_t>(count_budget) * 8 + 64;
    long t = 0;
    while (!cur.empty()) {
      next.clear();
      for (auto& pc : cur) {
        const bool crit_piece = pc.tlo.critical;
        const bool over_count = static_cast<int>(2 * out.right.size()) >= count_budget;
        const bool over_time = t >= T;
        const bool crit_ok = crit_piece && !out.central && crit_time && t < *crit_time;
        if ((over_time || over_count) && !crit_ok) {
          if (over_count && !over_time) out.budget_exceeded = true;
          out.frontier.push_back(std::move(pc));
          continue;
        }
        if (!crit_piece && next.size() > live_cap) {
          out.budget_exceeded = true;
          out.frontier.push_back(std::move(pc));
          continue;
        }
        advance(std::move(pc), out, next);
      }
      std::swap(cur, next);
      ++t;
    }
    return out;
  }

  const LevelGeometry& geometry() const { return *g_; }

 private:
  std::shared_ptr<const LevelGeometry> g_;
  std::shared_ptr<CriticalOrbit> crit_;
};

}  // namespace detail

struct ReturnSystem {
  int level = 0;
  Interval interval;                 // I_n = [-p_n, p_n]
  Interval boundary_box;             // enclosure of p_n
  std::vector<ReturnBranch> branches;  // non-central, ascending in x
  std::optional<ReturnBranch> central;
  int time_budget = 0;
  bool budget_exceeded = false;
  std::vector<Interval> uncovered;   // both sides
  Real uncovered_measure;
  // critical data (present once the landing of R_n(0) is resolved)
  std::optional<long> v;             // R_n(0) = f^v(0)
  std::optional<TreeAddress> critical_address;  // landing address of R_n(0)
  std::optional<long> tau;           // branch containing R_n(0), 0 if central
  std::optional<long> s;             // |critical_address|
  std::optional<Real> c;             // |I_{n+1}| / |I_n|
  std::optional<Interval> gape;      // levels n >= 2
  // why the landing of R_n(0) is unresolved, if it is
  std::optional<ErrorKind> landing_issue;
  std::string landing_note;
  // landing address at level n-1 of R_{n-1}(I_n^j), aligned with branches
  std::vector<std::optional<TreeAddress>> parent_address;

  std::shared_ptr<const detail::LevelGeometry> geometry;
  std::shared_ptr<detail::CriticalOrbit> crit;
  std::vector<detail::Piece> frontier;

  const MapParam& param() const { return geometry->m; }
  const Real& p() const { return geometry->p; }
  bool central_return() const { return critical_address && critical_address->empty(); }

  // Branch with the given nonzero index.
  const ReturnBranch& branch(long j) const {
    const long nr = static_cast<long>(branches.size()) / 2;
    if (j == 0 || j > nr || j < -nr) {
      throw Error(ErrorKind::InvalidAddress, "no branch with index " + std::to_string(j), j);
    }
    return j > 0 ? branches[nr + j - 1] : branches[nr + j];
  }
  long right_count() const { return static_cast<long>(branches.size()) / 2; }
};

namespace detail {

// Sorts right-half branches, mirrors them and assigns indices outward from 0.
inline void finalize_branches(ReturnSystem& rs, std::vector<ReturnBranch> right) {
  std::sort(right.begin(), right.end(),
            [](const ReturnBranch& x, const ReturnBranch& y) { return x.domain.lo() < y.domain.lo(); });
  std::vector<ReturnBranch> all;
  all.reserve(2 * right.size());
  for (std::size_t i = right.size(); i-- > 0;) {
    ReturnBranch l = right[i];
    l.index = -static_cast<long>(i + 1);
    l.domain = -right[i].domain;
    l.lo_box = -right[i].hi_box;
    l.hi_box = -right[i].lo_box;
    l.orientation = -right[i].orientation;
    l.itinerary[0] = -1;
    all.push_back(std::move(l));
  }
  for (std::size_t i = 0; i < right.size(); ++i) {
    right[i].index = static_cast<long>(i + 1);
    all.push_back(std::move(right[i]));
  }
  rs.branches = std::move(all);
}

inline void finalize_uncovered(ReturnSystem& rs) {
  rs.uncovered.clear();
  Real total(rs.param().precision());
  std::vector<Interval> right;
  for (const Piece& pc : rs.frontier) {
    right.emplace_back(pc.lo, pc.hi);
    total += pc.hi - pc.lo;
  }
  std::sort(right.begin(), right.end(),
            [](const Interval& x, const Interval& y) { return x.lo() < y.lo(); });
  for (std::size_t i = right.size(); i-- > 0;) rs.uncovered.push_back(-right[i]);
  for (auto& r : right) rs.uncovered.push_back(std::move(r));
  rs.uncovered_measure = total * 2L;
}

// Index of the non-central branch whose domain contains y (point value),
// 0 for the central domain, nothing if y is uncovered.
inline std::optional<long> find_branch(const ReturnSystem& rs, const Real& y) {
  if (rs.central && rs.central->domain.interior_contains(y)) return 0;
  const long nr = rs.right_count();
  const Real ay = abs(y);
  long lo = 0, hi = nr;  // first right branch with domain.hi > ay
  while (lo < hi) {
    const long mid = (lo + hi) / 2;
    if (rs.branches[nr + mid].domain.hi() <= ay) lo = mid + 1; else hi = mid;
  }
  if (lo < nr && rs.branches[nr + lo].domain.lo() <= ay) {
    return y.sign() >= 0 ? lo + 1 : -(lo + 1);
  }
  return std::nullopt;
}

// Certified variant on a box: throws PrecisionFailure on ambiguity.
inline std::optional<long> find_branch_certified(const ReturnSystem& rs, const Interval& y) {
  if (rs.central) {
    const Real& cl = rs.central->hi_box.lo();
    if (y.lo() > -cl && y.hi() < cl) return 0;
  }
  const auto j = find_branch(rs, y.mid());
  if (!j) return std::nullopt;
  if (*j == 0) throw Error(ErrorKind::PrecisionFailure, "point on the central boundary");
  const ReturnBranch& b = rs.branch(*j);
  if (!(y.lo() > b.lo_box.hi() && y.hi() < b.hi_box.lo())) {
    throw Error(ErrorKind::PrecisionFailure, "point on a branch boundary");
  }
  return j;
}

}  // namespace detail

// Pulls a segment Y in I_n back through branch j (any nonzero index, or 0 for
// the right half of the central branch).
inline Segment pullback_through(const ReturnSystem& rs, const ReturnBranch& br, const Segment& y) {
  const MapParam& m = rs.param();
  Interval a = detail::pull_box(m, y.lo, br.itinerary);
  Interval b = detail::pull_box(m, y.hi, br.itinerary);
  if (b.mid() < a.mid()) std::swap(a, b);
  detail::check_box(*rs.geometry, a);
  detail::check_box(*rs.geometry, b);
  return {a, b};
}

inline Segment whole_segment(const ReturnSystem& rs) {
  return {-rs.boundary_box, rs.boundary_box};
}

inline Segment central_segment(const ReturnSystem& rs) {
  if (!rs.central) throw Error(ErrorKind::MissingLevelData, "level has no central branch");
  return {rs.central->lo_box, rs.central->hi_box};
}

struct LandingComponents {
  Segment outer;  // I^d
  Segment core;   // C^d
};

inline LandingComponents landing_components(const ReturnSystem& rs, const TreeAddress& d) {
  Segment outer = whole_segment(rs);
  Segment core = central_segment(rs);
  for (std::size_t i = d.size(); i-- > 0;) {
    const ReturnBranch& br = rs.branch(d[i]);
    outer = pullback_through(rs, br, outer);
    core = pullback_through(rs, br, core);
  }
  // endpoint enclosures must be small against the segment itself
  for (const Segment* sg : {&outer, &core}) {
    const Real slack = sg->width() * pow2(-32, rs.param().precision());
    if (sg->lo.width() > slack || sg->hi.width() > slack) {
      throw Error(ErrorKind::PrecisionFailure, "landing component below working resolution");
    }
  }
  return {outer, core};
}

inline long landing_time(const ReturnSystem& rs, const TreeAddress& d) {
  long t = 0;
  for (long j : d.entries()) t += rs.branch(j).return_time;
  return t;
}

namespace detail {

// Follows the critical orbit from time v through the branches of rs until it
// enters the central domain, refining frontier pieces that contain it.
inline std::pair<std::vector<ReturnBranch*>, long> critical_landing(
    std::vector<ReturnBranch>& right, const ReturnBranch& central, std::vector<Piece>& frontier,
    const Discoverer& disc, CriticalOrbit& crit, long v, long time_cap) {
  const LevelGeometry& g = disc.geometry();
  std::vector<std::size_t> path;
  long t = v;
  auto locate_right = [&](const Interval& ay) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < right.size(); ++i) {
      const ReturnBranch& b = right[i];
      if (ay.hi() < b.lo_box.lo() || ay.lo() > b.hi_box.hi()) continue;
      if (ay.lo() > b.lo_box.hi() && ay.hi() < b.hi_box.lo()) return i;
      throw Error(ErrorKind::PrecisionFailure, "critical orbit on a branch boundary", t);
    }
    return std::nullopt;
  };
  while (true) {
    if (t - v > time_cap) throw Error(ErrorKind::InsufficientDepth, "landing walk exceeded its time cap", t);
    const BPoint y = crit.at(t);
    check_box(g, y.box);
    const Real& cl = central.hi_box.lo();
    if (y.box.lo() > -cl && y.box.hi() < cl) break;
    if (!(y.box.lo() > -g.pbox.lo() && y.box.hi() < g.pbox.lo())) {
      throw Error(ErrorKind::PrecisionFailure, "critical orbit left I_n during a return", t);
    }
    const Interval ay = y.box.abs();
    auto idx = locate_right(ay);
    while (!idx) {
      // refine the frontier piece holding |y|
      auto it = std::find_if(frontier.begin(), frontier.end(), [&](const Piece& pc) {
        return pc.lo_box.hi() < ay.lo() && ay.hi() < pc.hi_box.lo();
      });
      if (it == frontier.end()) {
        throw Error(ErrorKind::PrecisionFailure, "critical orbit not located in the partition", t);
      }
      Piece pc = std::move(*it);
      frontier.erase(it);
      while (true) {
        if (pc.time > t + time_cap) throw Error(ErrorKind::InsufficientDepth, "refinement exceeded its time cap", t);
        Discovery tmp;
        std::vector<Piece> next;
        disc.advance(std::move(pc), tmp, next);
        for (auto& b : tmp.right) right.push_back(std::move(b));
        bool found = false;
        for (auto& q : next) {
          if (!found && q.lo_box.hi() < ay.lo() && ay.hi() < q.hi_box.lo()) {
            pc = std::move(q);
            found = true;
          } else {
            frontier.push_back(std::move(q));
          }
        }
        if (!found) break;
      }
      idx = locate_right(ay);
    }
    path.push_back(*idx);
    t += right[*idx].return_time;
  }
  std::vector<ReturnBranch*> out;
  for (std::size_t i : path) out.push_back(&right[i]);
  // signs must be recovered by the caller: return the visited right branches and
  // the final time; sides are read back from the orbit.
  return {out, t};
}

}  // namespace detail

struct NestReport;

namespace detail {

inline std::optional<long> first_entry_time(CriticalOrbit& crit, const LevelGeometry& g, long cap) {
  for (long k = 1; k <= cap; ++k) {
    const BPoint y = crit.at(k);
    check_box(g, y.box);
    if (locate(g, y) == Loc::Inside) return k;
  }
  return std::nullopt;
}

// Discovers the level, resolves the landing of R_n(0) and assigns indices.
inline ReturnSystem build_level(int level, std::shared_ptr<const LevelGeometry> g,
                                std::shared_ptr<CriticalOrbit> crit, int T,
                                const NestBudgets& budgets, std::optional<long> v) {
  // niceness certificate on the boundary orbit
  for (long d = 1; d <= T; ++d) {
    const BPoint b = g->boundary(d);
    if (locate(*g, b) == Loc::Inside) throw Error(ErrorKind::NotNice, "boundary orbit enters int I", d);
  }
  Discoverer disc(g, crit);
  Discovery res = disc.run(T, budgets.count_budget, v);

  ReturnSystem rs;
  rs.level = level;
  rs.boundary_box = g->pbox;
  rs.interval = Interval(-g->p, g->p);
  rs.time_budget = T;
  rs.budget_exceeded = res.budget_exceeded;
  rs.geometry = g;
  rs.crit = crit;
  rs.central = res.central;

  std::vector<long> path_times;
  std::vector<int> path_sides;
  if (rs.central) {
    rs.v = rs.central->return_time;
    rs.c = rs.central->domain.hi() / g->p;
    const bool whole = rs.central->domain.hi() == g->p;
    if (!whole) {
      try {
        auto path = critical_landing(res.right, *rs.central, res.frontier, disc, *crit, *rs.v,
                                     budgets.landing_time_cap)
                        .first;
        long t = *rs.v;
        for (ReturnBranch* b : path) {
          path_times.push_back(b->return_time);
          path_sides.push_back(crit->at(t).v.sign() >= 0 ? 1 : -1);
          t += b->return_time;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::PrecisionFailure && e.kind() != ErrorKind::InsufficientDepth) throw;
        rs.landing_issue = e.kind();
        rs.landing_note = e.what();
      }
    }
  }
  // remember each path branch by its left endpoint before sorting
  std::vector<Real> path_keys;
  if (rs.central && !(rs.central->domain.hi() == g->p) && !rs.landing_issue) {
    long t = *rs.v;
    for (std::size_t i = 0; i < path_times.size(); ++i) {
      path_keys.push_back(abs(crit->at(t).v));
      t += path_times[i];
    }
  }
  rs.frontier = std::move(res.frontier);
  finalize_branches(rs, std::move(res.right));
  finalize_uncovered(rs);

  if (rs.central && !(rs.central->domain.hi() == g->p) && !rs.landing_issue) {
    TreeAddress d;
    for (std::size_t i = 0; i < path_keys.size(); ++i) {
      auto j = find_branch(rs, path_keys[i]);
      if (!j || *j == 0) throw Error(ErrorKind::PrecisionFailure, "landing path lost after sorting");
      d.push_back(path_sides[i] * *j);
    }
    rs.critical_address = d;
    rs.s = static_cast<long>(d.size());
    rs.tau = d.empty() ? 0 : d[0];
  }
  return rs;
}

}  // namespace detail

namespace detail {

inline std::shared_ptr<LevelGeometry> first_level_geometry(const MapParam& m) {
  const mpfr_prec_t prec = m.precision();
  auto g = std::make_shared<LevelGeometry>();
  g->m = m;
  g->p = find_fixed_points(m).p;
  g->fixed_boundary = true;
  // p = (sqrt(1 + 4a) - 1) / 2 with outward rounding
  Interval disc = Interval(m.a).scaled(4) + Interval(Real(1L, prec));
  Interval s = disc.sqrt() - Interval(Real(1L, prec));
  Real lo(prec), hi(prec);
  mpfr_div_2ui(lo.raw(), s.lo().raw(), 1, MPFR_RNDD);
  mpfr_div_2ui(hi.raw(), s.hi().raw(), 1, MPFR_RNDU);
  g->pbox = Interval(min(lo, g->p), max(hi, g->p));
  return g;
}

}  // namespace detail

// Branch decomposition of the first-return map to a symmetric nice interval
// I = [-p, p]. When p is the fixed point its orbit is handled exactly,
// otherwise the boundary orbit is followed with interval arithmetic.
inline ReturnSystem discover_branches(const MapParam& m, const Interval& I, int time_budget,
                                      int count_budget) {
  std::shared_ptr<detail::LevelGeometry> g = detail::first_level_geometry(m);
  if (!g->pbox.contains(I.hi())) {
    g = std::make_shared<detail::LevelGeometry>();
    g->m = m;
    g->p = I.hi();
    g->pbox = Interval(I.hi());
    g->use_forward = true;
    g->forward.push_back({g->p, g->pbox, 1});
  }
  auto crit = std::make_shared<detail::CriticalOrbit>(m);
  NestBudgets b;
  b.time_budget = time_budget;
  b.count_budget = count_budget;
  std::optional<long> v;
  try {
    v = detail::first_entry_time(*crit, *g, std::max<long>(time_budget, 1L << 12));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::PrecisionFailure) throw;
  }
  try {
    return detail::build_level(1, g, crit, time_budget, b, v);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientDepth) throw;
    return detail::build_level(1, g, crit, time_budget, b, std::nullopt);
  }
}

// T_1 = [-p, p] for the orientation reversing fixed point p.
inline ReturnSystem build_first_level(const MapParam& m, const NestBudgets& budgets = {}) {
  const FixedPoints fp = find_fixed_points(m);
  const mpfr_prec_t prec = m.precision();
  const Real tol = pow2(-static_cast<long>(prec) / 2, prec);
  if (abs(fp.multiplier + Real(1L, prec)) < tol) throw Error(ErrorKind::ParabolicObstruction, "Df(p) = -1");
  if (fp.multiplier > Real(-1L, prec)) {
    throw Error(ErrorKind::NoOrientationReversingPoint, "fixed point p is attracting (a < 3/4)");
  }
  auto g = detail::first_level_geometry(m);
  auto crit = std::make_shared<detail::CriticalOrbit>(m);
  const auto v = detail::first_entry_time(*crit, *g, budgets.landing_time_cap);
  return detail::build_level(1, g, crit, budgets.time_budget, budgets, v);
}

namespace detail {

// Boundary orbit of I_{n+1} = central domain of rs.
inline std::shared_ptr<LevelGeometry> next_geometry(const ReturnSystem& rs) {
  const ReturnBranch& c = *rs.central;
  const MapParam& m = rs.param();
  auto g = std::make_shared<LevelGeometry>();
  g->m = m;
  g->p = c.domain.hi();
  g->pbox = c.hi_box;
  g->parent = rs.geometry;
  // b_i = f^i(c) for i < v: pull back along the tail of the central itinerary
  const int v = c.return_time;
  const Real target = c.image_sign > 0 ? rs.p() : -rs.p();
  const Interval tbox = c.image_sign > 0 ? rs.boundary_box : -rs.boundary_box;
  g->chain.resize(v + 1);
  g->chain[0] = {g->p, g->pbox, 1};
  g->chain[v] = {target, tbox, 0};
  for (int i = 1; i < v; ++i) {
    std::vector<signed char> tail(c.itinerary.begin() + i, c.itinerary.end());
    g->chain[i] = {pull_value(m, target, tail), pull_box(m, tbox, tail), 0};
  }
  return g;
}

}  // namespace detail

// Landing address at level n of R_n(x) for x in I_{n+1}, by following the
// point's orbit (nothing if it crosses an unresolved part of I_n).
inline std::optional<TreeAddress> landing_address_of(const ReturnSystem& rs, const Real& x,
                                                     long max_steps = 1L << 14) {
  const MapParam& m = rs.param();
  Real y = x;
  for (long i = 0; i < rs.central->return_time; ++i) y = m.f(y);
  TreeAddress d;
  for (long step = 0; step < max_steps; ++step) {
    const auto j = detail::find_branch(rs, y);
    if (!j) return std::nullopt;
    if (*j == 0) return d;
    d.push_back(*j);
    for (int i = 0; i < rs.branch(*j).return_time; ++i) y = m.f(y);
  }
  return std::nullopt;
}

inline ReturnSystem build_next_level(const ReturnSystem& rs, const NestBudgets& budgets = {}) {
  if (rs.landing_issue) throw Error(*rs.landing_issue, rs.landing_note, rs.level);
  if (!rs.central || !rs.critical_address || !rs.v) {
    throw Error(ErrorKind::MissingLevelData, "level has no resolved central return");
  }
  const long v_next = *rs.v + landing_time(rs, *rs.critical_address);
  auto g = detail::next_geometry(rs);
  const int T = static_cast<int>(std::max<long>(*rs.v + budgets.time_budget, v_next));
  ReturnSystem next = detail::build_level(rs.level + 1, g, rs.crit, T, budgets, v_next);
  if (next.central && *next.v != v_next) {
    throw Error(ErrorKind::PrecisionFailure, "central return time disagrees with the landing time", rs.level);
  }
  // level-n landing address of every level-(n+1) branch
  next.parent_address.resize(next.branches.size());
  for (std::size_t i = 0; i < next.branches.size(); ++i) {
    const ReturnBranch& b = next.branches[i];
    if (b.index < 0) continue;
    auto d = landing_address_of(rs, b.domain.mid());
    if (d && *rs.v + landing_time(rs, *d) != b.return_time) d.reset();
    next.parent_address[i] = d;
    next.parent_address[next.branches.size() - 1 - i] = d;
  }
  // gape interval: pullback of I^d through the central branch, d = address of R_n(0)
  {
    const LandingComponents lc = landing_components(rs, *rs.critical_address);
    const Segment& o = lc.outer;
    const ReturnBranch& c = *rs.central;
    const Interval& endpoint = c.image_sign > 0 ? o.hi : o.lo;
    Real x = detail::pull_value(rs.param(), endpoint.mid(), c.itinerary);
    if (rs.critical_address->empty()) x = c.domain.hi();
    next.gape = Interval(-x, x);
  }
  return next;
}

enum class Termination {
  BudgetExhausted,
  RenormalizationDetected,
  RegularDetected,
  ParabolicObstruction,
  PrecisionFailure,
};

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::BudgetExhausted: return "BudgetExhausted";
    case Termination::RenormalizationDetected: return "RenormalizationDetected";
    case Termination::RegularDetected: return "RegularDetected";
    case Termination::ParabolicObstruction: return "ParabolicObstruction";
    case Termination::PrecisionFailure: return "PrecisionFailure";
  }
  return "Unknown";
}

struct NestReport {
  MapParam param;
  std::vector<ReturnSystem> levels;
  Termination termination = Termination::BudgetExhausted;
  std::optional<int> period;  // RenormalizationDetected / RegularDetected
  std::string reason;
  mpfr_prec_t precision_used = 0;
};

namespace detail {

inline NestReport build_nest_once(const MapParam& m, const NestBudgets& budgets) {
  NestReport rep{m, {}, Termination::BudgetExhausted, std::nullopt, "", m.precision()};
  try {
    rep.levels.push_back(build_first_level(m, budgets));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParabolicObstruction) {
      rep.termination = Termination::ParabolicObstruction;
      rep.reason = e.what();
      return rep;
    }
    if (e.kind() == ErrorKind::NoOrientationReversingPoint) {
      rep.termination = Termination::RegularDetected;
      rep.period = 1;
      rep.reason = "attracting fixed point";
      return rep;
    }
    throw;
  }
  int cascade = 0;
  while (true) {
    ReturnSystem& cur = rep.levels.back();
    if (!cur.central) {
      rep.reason = "critical orbit does not return within budget";
      return rep;
    }
    if (cur.central->domain.hi() == cur.p()) {
      rep.termination = Termination::RenormalizationDetected;
      rep.period = static_cast<int>(*cur.v);
      rep.reason = "central domain is the whole interval";
      return rep;
    }
    cascade = cur.central_return() ? cascade + 1 : 0;
    if (cascade >= budgets.central_cascade_bound) {
      if (auto cyc = find_attracting_cycle(m, budgets.renormalization_max_period, 4096)) {
        rep.termination = Termination::RegularDetected;
        rep.period = cyc->period;
        rep.reason = "central return cascade with an attracting cycle";
        return rep;
      }
      if (auto per = find_renormalization(m, budgets.renormalization_max_period)) {
        rep.termination = Termination::RenormalizationDetected;
        rep.period = *per;
        rep.reason = "central return cascade with a trapping interval";
        return rep;
      }
      rep.reason = "central return cascade";
      return rep;
    }
    if (static_cast<int>(rep.levels.size()) >= budgets.depth) {
      rep.reason = "depth reached";
      return rep;
    }
    try {
      ReturnSystem next = build_next_level(cur, budgets);
      rep.levels.push_back(std::move(next));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InsufficientDepth) {
        rep.reason = e.what();
        return rep;
      }
      throw;
    }
  }
}

}  // namespace detail

// Principal nest T_1 > T_2 > ... up to budgets.depth levels. A degenerate
// enclosure doubles the precision and retries before giving up.
inline NestReport build_nest(const MapParam& m, const NestBudgets& budgets = {}) {
  MapParam cur = m;
  int retries = budgets.precision_retries;
  std::string last;
  while (true) {
    try {
      return detail::build_nest_once(cur, budgets);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::PrecisionFailure) throw;
      last = e.what();
      if (retries-- <= 0) break;
      cur = invariant_interval(m.a.with_precision(cur.precision() * 2));
    }
  }
  // keep whatever levels the last precision could certify
  NestBudgets shallow = budgets;
  NestReport best{cur, {}, Termination::PrecisionFailure, std::nullopt, last, cur.precision()};
  for (int d = budgets.depth - 1; d >= 1; --d) {
    shallow.depth = d;
    try {
      NestReport r = detail::build_nest_once(cur, shallow);
      best.levels = std::move(r.levels);
      break;
    } catch (const Error&) {
    }
  }
  return best;
}

struct SimpleMapVerdict {
  std::vector<bool> central_flags;
  std::string verdict;  // Simple, CentralCascade, RecentCentralReturn, Undetermined
};

inline SimpleMapVerdict detect_central_and_simple(const NestReport& rep, int K = 2) {
  SimpleMapVerdict v;
  for (const auto& l : rep.levels) v.central_flags.push_back(l.central_return() || (l.central && l.central->domain.hi() == l.p()));
  if (v.central_flags.empty()) {
    v.verdict = "Undetermined";
    return v;
  }
  const bool all = std::all_of(v.central_flags.begin(), v.central_flags.end(), [](bool b) { return b; });
  if (all || rep.termination == Termination::RenormalizationDetected) {
    v.verdict = "CentralCascade";
    return v;
  }
  const int n = static_cast<int>(v.central_flags.size());
  bool recent = false;
  for (int i = std::max(0, n - K); i < n; ++i) recent = recent || v.central_flags[i];
  v.verdict = recent ? "RecentCentralReturn" : "Simple";
  return v;
}

struct HyperbolicSample {
  Real exponent;
  bool degenerate = false;
};

// (1/n) ln|Df^n(x)| for an orbit avoiding the central domain of rs.
inline HyperbolicSample hyperbolic_outside(const ReturnSystem& rs, const Real& x, int n) {
  const MapParam& m = rs.param();
  if (n == 0) return {Real(m.precision()), true};
  if (!rs.central) throw Error(ErrorKind::MissingLevelData, "level has no central domain");
  Real y = x, sum(m.precision());
  for (int k = 0; k < n; ++k) {
    if (rs.central->domain.contains(y)) throw Error(ErrorKind::OrbitEntersNest, "orbit entered I_{n+1}", k);
    sum += log(abs(y * 2L));
    y = m.f(y);
  }
  return {sum / static_cast<long>(n), false};
}

}  // namespace qnest
