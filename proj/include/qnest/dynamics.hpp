#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "qnest/errors.hpp"
#include "qnest/real.hpp"

namespace qnest {

struct MapParam {
  Real a;
  Real beta;  // I = [-beta, beta], -beta is the fixed point

  mpfr_prec_t precision() const { return a.precision(); }
  Interval interval() const { return {-beta, beta}; }
  Real f(const Real& x) const { return quadratic(a, x); }
  Interval f(const Interval& x) const { return quadratic(a, x); }
};

// beta is rounded down on purpose: any b in [a, beta] gives f([-b, b]) in
// [-b, b], so the rounded interval stays exactly invariant.
inline MapParam invariant_interval(const Real& a) {
  const mpfr_prec_t prec = a.precision();
  const Real quarter = Real::parse("-0.25", prec);
  if (!a.is_finite() || a < quarter || a > Real(2L, prec)) {
    throw Error(ErrorKind::ParamOutOfRange, "a = " + a.to_string() + " outside [-1/4, 2]");
  }
  Real disc(prec);
  mpfr_mul_ui(disc.raw(), a.raw(), 4, MPFR_RNDD);
  mpfr_add_ui(disc.raw(), disc.raw(), 1, MPFR_RNDD);
  if (disc.sign() < 0) mpfr_set_zero(disc.raw(), 1);
  Real beta(prec);
  mpfr_sqrt(beta.raw(), disc.raw(), MPFR_RNDD);
  mpfr_add_ui(beta.raw(), beta.raw(), 1, MPFR_RNDD);
  mpfr_div_2ui(beta.raw(), beta.raw(), 1, MPFR_RNDD);

  // Exact check at doubled precision: a - beta^2 >= -beta and a <= beta.
  const mpfr_prec_t wide = 2 * prec + 8;
  Real b2(wide), lhs(wide);
  mpfr_sqr(b2.raw(), beta.raw(), MPFR_RNDD);
  mpfr_sub(lhs.raw(), a.raw(), b2.raw(), MPFR_RNDD);
  if (lhs < -beta || a > beta) {
    throw Error(ErrorKind::VerificationFailed, "f(I) not inside I at a = " + a.to_string());
  }
  return {a, beta};
}

struct OrbitSample {
  Real x0;
  std::size_t length = 0;
  std::vector<Real> points;           // length + 1 entries
  std::vector<Real> logderiv_prefix;  // only the defined prefix is stored
  std::optional<std::size_t> zero_hit;

  // ln|Df^k(x0)|, or nothing when the orbit passed through 0 before time k.
  std::optional<Real> logderiv(std::size_t k) const {
    if (k < logderiv_prefix.size()) return logderiv_prefix[k];
    return std::nullopt;
  }
};

inline OrbitSample iterate(const MapParam& m, const Real& x0, std::size_t n) {
  if (abs(x0) > m.beta) {
    throw Error(ErrorKind::PreconditionViolated, "x0 outside the invariant interval");
  }
  const mpfr_prec_t prec = std::max(m.precision(), x0.precision());
  OrbitSample s{x0.with_precision(prec), n, {}, {}, std::nullopt};
  s.points.reserve(n + 1);
  s.logderiv_prefix.reserve(n + 1);
  s.points.push_back(s.x0);
  s.logderiv_prefix.push_back(Real(prec));
  Real t(prec);
  for (std::size_t k = 0; k < n; ++k) {
    const Real& x = s.points.back();
    if (!s.zero_hit) {
      if (x.is_zero()) {
        s.zero_hit = k;
      } else {
        mpfr_mul_2ui(t.raw(), x.raw(), 1, MPFR_RNDN);
        mpfr_abs(t.raw(), t.raw(), MPFR_RNDN);
        mpfr_log(t.raw(), t.raw(), MPFR_RNDN);
        s.logderiv_prefix.push_back(s.logderiv_prefix.back() + t);
      }
    }
    s.points.push_back(quadratic(m.a, x));
  }
  return s;
}

namespace detail {

// Certified enclosure of |Df^n| over X, or nothing if some image X_i with
// i < n contains 0 (then the cell must be refined).
inline std::optional<Interval> derivative_enclosure(const MapParam& m, Interval x, int n) {
  const mpfr_prec_t prec = x.precision();
  Real lo(1L, prec), hi(1L, prec);
  const Interval a(m.a);
  for (int i = 0; i < n; ++i) {
    if (x.contains_zero()) return std::nullopt;
    const Real u = x.mig(), v = x.mag();
    mpfr_mul(lo.raw(), lo.raw(), u.raw(), MPFR_RNDD);
    mpfr_mul_2ui(lo.raw(), lo.raw(), 1, MPFR_RNDD);
    mpfr_mul(hi.raw(), hi.raw(), v.raw(), MPFR_RNDU);
    mpfr_mul_2ui(hi.raw(), hi.raw(), 1, MPFR_RNDU);
    x = quadratic(a, x);
  }
  return Interval(lo, hi);
}

inline Interval bisect_half(const Interval& x, bool upper) {
  const Real m = x.mid();
  return upper ? Interval(m, x.hi()) : Interval(x.lo(), m);
}

}  // namespace detail

// Certified upper bound for sup_J |Df^n| / inf_J |Df^n|, by subdividing J into
// `cells` pieces and refining any piece whose image chain meets 0.
inline Real distortion(const MapParam& m, const Interval& J, int n, int cells = 64,
                       int max_depth = 24) {
  const mpfr_prec_t prec = std::max(m.precision(), J.precision());
  if (n <= 0) return Real(1L, prec);
  Real sup(prec), inf(prec);
  bool have = false;
  std::vector<std::pair<Interval, int>> stack;
  const Real step = J.width() / static_cast<long>(cells);
  for (int c = cells - 1; c >= 0; --c) {
    Real lo = c == 0 ? J.lo() : J.lo() + step * static_cast<long>(c);
    Real hi = c == cells - 1 ? J.hi() : J.lo() + step * static_cast<long>(c + 1);
    if (hi < lo) std::swap(lo, hi);
    stack.emplace_back(Interval(lo, hi), 0);
  }
  while (!stack.empty()) {
    auto [cell, depth] = std::move(stack.back());
    stack.pop_back();
    auto d = detail::derivative_enclosure(m, cell, n);
    if (!d || d->lo().is_zero()) {
      if (depth >= max_depth) {
        throw Error(ErrorKind::NotDiffeomorphic, "critical preimage inside J", n);
      }
      stack.emplace_back(detail::bisect_half(cell, true), depth + 1);
      stack.emplace_back(detail::bisect_half(cell, false), depth + 1);
      continue;
    }
    if (!have || d->hi() > sup) sup = d->hi();
    if (!have || d->lo() < inf) inf = d->lo();
    have = true;
  }
  Real r(prec);
  mpfr_div(r.raw(), sup.raw(), inf.raw(), MPFR_RNDU);
  if (r < Real(1L, prec)) r = Real(1L, prec);
  return r;
}

struct FixedPoints {
  Real p;  // positive root, orientation reversing candidate
  Real q;  // negative root, equal to -beta
  Real multiplier;  // Df(p) = -2p
};

inline FixedPoints find_fixed_points(const MapParam& m) {
  const mpfr_prec_t prec = m.precision();
  Real disc = m.a * 4L + 1L;
  if (disc.sign() < 0) throw Error(ErrorKind::ParamOutOfRange, "a < -1/4");
  const Real s = sqrt(disc);
  Real p = (s - 1L) / 2L;
  Real q = (-s - 1L) / 2L;
  return {p, q, p * Real(-2L, prec)};
}

struct CycleReport {
  int period = 0;
  std::vector<Real> points;  // starts at the cycle point closest to 0
  Real multiplier;
  Real multiplier_bound;  // certified upper bound on |Df^period|
};

namespace detail {

// Certifies an attracting cycle through y: f^m(U) inside U and |Df^m(U)| < 1.
// Returns +1 attracting, -1 repelling, 0 undecided.
inline int certify_cycle(const MapParam& m, const Real& y, int period, const Real& radius,
                         Real* bound) {
  const Interval u(y - radius, y + radius);
  Interval x = u;
  const Interval a(m.a);
  const mpfr_prec_t prec = y.precision();
  Real lo(1L, prec), hi(1L, prec);
  for (int i = 0; i < period; ++i) {
    const Real s = x.mig(), t = x.mag();
    mpfr_mul(lo.raw(), lo.raw(), s.raw(), MPFR_RNDD);
    mpfr_mul_2ui(lo.raw(), lo.raw(), 1, MPFR_RNDD);
    mpfr_mul(hi.raw(), hi.raw(), t.raw(), MPFR_RNDU);
    mpfr_mul_2ui(hi.raw(), hi.raw(), 1, MPFR_RNDU);
    x = quadratic(a, x);
  }
  const Real one(1L, prec);
  if (hi < one && u.contains(x)) {
    *bound = hi;
    return 1;
  }
  if (lo > one) return -1;
  return 0;
}

}  // namespace detail

inline std::optional<CycleReport> find_attracting_cycle(const MapParam& m, int max_period,
                                                        int max_transient) {
  if (max_period < 1) throw Error(ErrorKind::PreconditionViolated, "max_period < 1");
  const mpfr_prec_t prec = m.precision();
  const Real tol = pow2(-static_cast<long>(prec / 4), prec);
  std::vector<Real> hist;
  hist.reserve(max_transient + 1);
  hist.emplace_back(prec);
  for (int k = 0; k < max_transient; ++k) hist.push_back(quadratic(m.a, hist.back()));

  const int T = max_transient;
  int period = 0;
  for (int p = 1; p <= max_period && p <= T; ++p) {
    if (abs(hist[T] - hist[T - p]) < tol) {
      period = p;
      break;
    }
  }
  if (period == 0) return std::nullopt;

  std::vector<Real> cyc(hist.begin() + (T - period + 1), hist.begin() + T + 1);
  std::size_t best = 0;
  for (std::size_t i = 1; i < cyc.size(); ++i) {
    if (abs(cyc[i]) < abs(cyc[best])) best = i;
  }
  std::rotate(cyc.begin(), cyc.begin() + static_cast<long>(best), cyc.end());

  Real mult(1L, prec);
  for (const Real& x : cyc) mult *= x * -2L;

  const Real delta = abs(hist[T] - hist[T - period]);
  bool straddle = false;
  for (long e = prec / 2; e >= prec / 8; e -= std::max<long>(1, prec / 16)) {
    Real radius = max(pow2(-e, prec), delta * 64L);
    Real bound(prec);
    const int verdict = detail::certify_cycle(m, cyc.front(), period, radius, &bound);
    if (verdict > 0) return CycleReport{period, cyc, mult, bound};
    if (verdict == 0) straddle = true;
    if (verdict < 0 && !straddle) return std::nullopt;
  }
  if (abs(mult) > Real(1L, prec)) return std::nullopt;
  throw Error(ErrorKind::Inconclusive, "cycle multiplier enclosure straddles 1", period);
}

// Certified check that f^m(T) lies in T for the symmetric interval T = [-t, t],
// with f^j([0, t]) avoiding 0 for 0 < j < m (restrictive interval of period m).
inline bool certify_trapping(const MapParam& m, const Real& t, int period) {
  const Interval a(m.a);
  Interval x(Real(t.precision()), t);
  for (int j = 1; j <= period; ++j) {
    x = quadratic(a, x);
    if (j < period && x.contains_zero()) return false;
  }
  return Interval(-t, t).contains(x);
}

// Looks for a period m <= max_period renormalization: T is the symmetric hull of
// the critical orbit sampled at multiples of m after a transient.
inline std::optional<int> find_renormalization(const MapParam& m, int max_period,
                                               int transient = 256, int samples = 64) {
  const mpfr_prec_t prec = m.precision();
  std::vector<Real> orb;
  orb.reserve(transient + max_period * samples + 1);
  orb.emplace_back(prec);
  for (int k = 0; k < transient + max_period * samples; ++k) orb.push_back(quadratic(m.a, orb.back()));
  for (int per = 2; per <= max_period; ++per) {
    Real t(prec);
    for (int s = 0; s <= samples && s * per < static_cast<int>(orb.size()); ++s) {
      t = max(t, abs(orb[s * per]));
    }
    if (t.is_zero()) continue;
    // Slight enlargement so the hull of finitely many samples can trap.
    for (int grow : {0, 6, 12}) {
      Real tt = t * (Real(1L, prec) + pow2(-grow, prec) * Real(grow == 0 ? 0L : 1L, prec));
      if (abs(tt) >= m.beta) break;
      if (certify_trapping(m, tt, per)) return per;
    }
  }
  return std::nullopt;
}

}  // namespace qnest
