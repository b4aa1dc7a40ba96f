#pragma once

// Bounds for gamma-capacities of finite unions of intervals.
//
// The capacity is a supremum over all gamma-quasisymmetric maps. The lower
// bound evaluates an explicit test family; the upper bound applies the
// two-sided Hoelder inequality with k = k_of_gamma to every complementary gap.
// All certified quantities are computed with directed rounding.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "qnest/constants.hpp"
#include "qnest/errors.hpp"
#include "qnest/real.hpp"

namespace qnest {

inline constexpr mpfr_prec_t kCapacityPrecision = 128;

struct IntervalSet {
  Interval ambient;
  std::vector<Interval> parts;  // sorted; touching parts are merged, empty ones dropped

  IntervalSet() = default;
  IntervalSet(Interval amb, std::vector<Interval> ps) : ambient(std::move(amb)) {
    if (!(ambient.lo() < ambient.hi())) throw Error(ErrorKind::PreconditionViolated, "degenerate ambient interval");
    std::sort(ps.begin(), ps.end(), [](const Interval& x, const Interval& y) { return x.lo() < y.lo(); });
    for (auto& p : ps) {
      if (!ambient.contains(p)) throw Error(ErrorKind::PreconditionViolated, "part outside ambient interval");
      if (!(p.lo() < p.hi())) continue;
      if (!parts.empty()) {
        if (p.lo() < parts.back().hi()) throw Error(ErrorKind::PreconditionViolated, "overlapping parts");
        if (p.lo() == parts.back().hi()) {
          parts.back() = Interval(parts.back().lo(), p.hi());
          continue;
        }
      }
      parts.push_back(std::move(p));
    }
  }

  bool empty() const { return parts.empty(); }
  bool full() const { return parts.size() == 1 && parts[0].lo() == ambient.lo() && parts[0].hi() == ambient.hi(); }

  // parts clipped to a sub-interval J, as a set with ambient J
  IntervalSet restrict_to(const Interval& J) const {
    std::vector<Interval> out;
    for (const auto& p : parts) {
      const Real lo = max(p.lo(), J.lo()), hi = min(p.hi(), J.hi());
      if (lo < hi) out.emplace_back(lo, hi);
    }
    return IntervalSet(J, std::move(out));
  }
};

namespace detail {

// (x - A) / (B - A) rounded in direction dir
inline Real normalize(const Real& x, const Interval& amb, mpfr_rnd_t dir, mpfr_prec_t prec) {
  Real num(prec), den(prec);
  const mpfr_rnd_t opp = dir == MPFR_RNDD ? MPFR_RNDU : MPFR_RNDD;
  mpfr_sub(num.raw(), x.raw(), amb.lo().raw(), dir);
  mpfr_sub(den.raw(), amb.hi().raw(), amb.lo().raw(), opp);
  Real r(prec);
  mpfr_div(r.raw(), num.raw(), den.raw(), dir);
  return r;
}

inline Interval normalized(const Real& x, const Interval& amb, mpfr_prec_t prec) {
  return Interval(normalize(x, amb, MPFR_RNDD, prec), normalize(x, amb, MPFR_RNDU, prec));
}

// |b - a| / |I| rounded in direction dir (dir = RNDD gives a lower bound)
inline Real relative_length(const Real& a, const Real& b, const Interval& amb, mpfr_rnd_t dir,
                            mpfr_prec_t prec) {
  const mpfr_rnd_t opp = dir == MPFR_RNDD ? MPFR_RNDU : MPFR_RNDD;
  Real num(prec), den(prec), r(prec);
  mpfr_sub(num.raw(), b.raw(), a.raw(), dir);
  mpfr_sub(den.raw(), amb.hi().raw(), amb.lo().raw(), opp);
  mpfr_div(r.raw(), num.raw(), den.raw(), dir);
  return r;
}

// |d|^kappa for an interval d >= 0 pointwise, outward
inline Interval pow_abs(const Interval& d, double kappa, mpfr_prec_t prec) {
  Real k(kappa, prec);
  Real lo(prec), hi(prec);
  mpfr_pow(lo.raw(), d.mig().raw(), k.raw(), MPFR_RNDD);
  mpfr_pow(hi.raw(), d.mag().raw(), k.raw(), MPFR_RNDU);
  return Interval(lo, hi);
}

inline Interval divide(const Interval& num, const Interval& den, mpfr_prec_t prec) {
  Real lo(prec), hi(prec);
  mpfr_div(lo.raw(), num.lo().raw(), den.hi().raw(), MPFR_RNDD);
  mpfr_div(hi.raw(), num.hi().raw(), den.lo().raw(), MPFR_RNDU);
  return Interval(lo, hi);
}

}  // namespace detail

enum class QsKind { Affine, PowerLaw, Composite };

// A homeomorphism of [0, 1] (normalized coordinates of the ambient interval).
struct QsTestMap {
  QsKind kind = QsKind::Affine;
  double kappa = 1.0;                // PowerLaw
  double anchor = 0.0;               // PowerLaw, in [0, 1]
  std::vector<double> breaks;        // Composite: 0 = b_0 < ... < b_m = 1
  std::vector<double> slopes;        // Composite: m positive slopes
  double gamma_budget = 1.0;

  static QsTestMap affine() { return {}; }

  static QsTestMap power_law(double kappa, double anchor, double gamma) {
    if (!(kappa > 0) || std::max(kappa, 1.0 / kappa) > gamma * (1 + 1e-15)) {
      throw Error(ErrorKind::GammaOutOfRange, "power-law exponent outside [1/gamma, gamma]");
    }
    if (!(anchor >= 0 && anchor <= 1)) throw Error(ErrorKind::PreconditionViolated, "anchor outside [0,1]");
    QsTestMap h;
    h.kind = QsKind::PowerLaw;
    h.kappa = kappa;
    h.anchor = anchor;
    h.gamma_budget = gamma;
    h.verify_on_grid();
    return h;
  }

  static QsTestMap composite(std::vector<double> breaks, std::vector<double> slopes, double gamma) {
    if (breaks.size() != slopes.size() + 1 || slopes.empty() || breaks.front() != 0.0 || breaks.back() != 1.0) {
      throw Error(ErrorKind::PreconditionViolated, "composite map needs breaks 0..1 and one slope per piece");
    }
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      if (!(breaks[i] < breaks[i + 1])) throw Error(ErrorKind::PreconditionViolated, "breaks not increasing");
    }
    const auto [mn, mx] = std::minmax_element(slopes.begin(), slopes.end());
    if (!(*mn > 0) || *mx / *mn > gamma * (1 + 1e-15)) {
      throw Error(ErrorKind::GammaOutOfRange, "slope ratio exceeds gamma");
    }
    QsTestMap h;
    h.kind = QsKind::Composite;
    h.breaks = std::move(breaks);
    h.slopes = std::move(slopes);
    h.gamma_budget = gamma;
    h.verify_on_grid();
    return h;
  }

  double operator()(double u) const {
    switch (kind) {
      case QsKind::Affine:
        return u;
      case QsKind::PowerLaw: {
        const double d = u - anchor;
        const double s = std::pow(std::fabs(d), kappa);
        return d < 0 ? -s : s;
      }
      case QsKind::Composite: {
        double acc = 0;
        for (std::size_t i = 0; i < slopes.size(); ++i) {
          if (u <= breaks[i]) break;
          acc += slopes[i] * (std::min(u, breaks[i + 1]) - breaks[i]);
        }
        return acc;
      }
    }
    return u;
  }

  // outward enclosure of h(u) for u in the given interval
  Interval operator()(const Interval& u, mpfr_prec_t prec) const {
    switch (kind) {
      case QsKind::Affine:
        return u;
      case QsKind::PowerLaw: {
        const Interval d = u - Interval(Real(anchor, prec));
        if (d.lo().sign() >= 0) return detail::pow_abs(d, kappa, prec);
        if (d.hi().sign() <= 0) return -detail::pow_abs(d, kappa, prec);
        const Interval neg = detail::pow_abs(Interval(d.lo(), Real(0L, prec)), kappa, prec);
        const Interval pos = detail::pow_abs(Interval(Real(0L, prec), d.hi()), kappa, prec);
        return Interval(-neg.hi(), pos.hi());
      }
      case QsKind::Composite: {
        // monotone: enclose through the endpoints
        auto at = [&](const Real& x, bool up) {
          Real acc(prec);
          for (std::size_t i = 0; i < slopes.size(); ++i) {
            const Real b0(breaks[i], prec), b1(breaks[i + 1], prec);
            if (x <= b0) break;
            Real seg(prec), t(prec);
            mpfr_sub(seg.raw(), min(x, b1).raw(), b0.raw(), up ? MPFR_RNDU : MPFR_RNDD);
            mpfr_mul_d(t.raw(), seg.raw(), slopes[i], up ? MPFR_RNDU : MPFR_RNDD);
            mpfr_add(acc.raw(), acc.raw(), t.raw(), up ? MPFR_RNDU : MPFR_RNDD);
          }
          return acc;
        };
        return Interval(at(u.lo(), false), at(u.hi(), true));
      }
    }
    return u;
  }

  std::string descriptor() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case QsKind::Affine:
        os << "affine";
        break;
      case QsKind::PowerLaw:
        os << "power(kappa=" << kappa << ",anchor=" << anchor << ")";
        break;
      case QsKind::Composite:
        os << "piecewise-linear(pieces=" << slopes.size() << ",slope_ratio="
           << *std::max_element(slopes.begin(), slopes.end()) / *std::min_element(slopes.begin(), slopes.end())
           << ")";
        break;
    }
    return os.str();
  }

  // |h(J)| / |h(I)| for J inside I, double precision
  double ratio(double i0, double i1, double j0, double j1) const {
    return ((*this)(j1) - (*this)(j0)) / ((*this)(i1) - (*this)(i0));
  }

  // two-sided Hoelder inequality for one nested pair, with a relative slack
  static bool holder_ok(double k, double rel_len, double r) {
    const double lo = std::pow(rel_len, k) / k;
    const double hi = std::pow(k * rel_len, 1.0 / k);
    return r >= lo * (1 - 1e-9) && r <= hi * (1 + 1e-9);
  }

  void verify_on_grid() const {
    const double k = k_of_gamma(gamma_budget);
    constexpr int G = 8;
    for (int a = 0; a < G; ++a) {
      for (int b = a + 1; b <= G; ++b) {
        for (int c = a; c < b; ++c) {
          for (int d = c + 1; d <= b; ++d) {
            const double i0 = double(a) / G, i1 = double(b) / G, j0 = double(c) / G, j1 = double(d) / G;
            if (!holder_ok(k, (j1 - j0) / (i1 - i0), ratio(i0, i1, j0, j1))) {
              throw Error(ErrorKind::VerificationFailed, "test map violates the k(gamma) inequality: " + descriptor());
            }
          }
        }
      }
    }
  }
};

struct CapacityBound {
  double gamma = 1;
  Real lower;
  Real upper;
  int effort = 0;
  std::string family_descriptor;  // members searched
  std::string witness;            // member attaining the lower bound
  long gap_count = 0;
};

namespace detail {

struct NormalizedSet {
  std::vector<Interval> parts;  // enclosures of normalized endpoints, as [lo_enclosure, hi_enclosure] pairs
  std::vector<double> lo_d, hi_d;
  Real measure_lo;              // lower bound on |X| / |I|
  std::vector<Real> gaps_lo;    // lower bounds on relative gap lengths
};

inline NormalizedSet normalize_set(const IntervalSet& X, mpfr_prec_t prec) {
  NormalizedSet n;
  n.measure_lo = Real(prec);
  Real prev = X.ambient.lo();
  for (const auto& p : X.parts) {
    const Interval a = normalized(p.lo(), X.ambient, prec);
    const Interval b = normalized(p.hi(), X.ambient, prec);
    n.parts.push_back(Interval(a.lo(), b.hi()));
    n.lo_d.push_back(a.mid().to_double());
    n.hi_d.push_back(b.mid().to_double());
    Real len = relative_length(p.lo(), p.hi(), X.ambient, MPFR_RNDD, prec);
    mpfr_add(n.measure_lo.raw(), n.measure_lo.raw(), len.raw(), MPFR_RNDD);
    if (prev < p.lo()) n.gaps_lo.push_back(relative_length(prev, p.lo(), X.ambient, MPFR_RNDD, prec));
    prev = p.hi();
  }
  if (prev < X.ambient.hi()) n.gaps_lo.push_back(relative_length(prev, X.ambient.hi(), X.ambient, MPFR_RNDD, prec));
  return n;
}

// certified lower bound of |h(X)| / |h(I)|
inline Real certified_ratio(const QsTestMap& h, const IntervalSet& X, mpfr_prec_t prec) {
  Interval num(Real(0L, prec));
  for (const auto& p : X.parts) {
    const Interval a = normalized(p.lo(), X.ambient, prec);
    const Interval b = normalized(p.hi(), X.ambient, prec);
    const Interval ha = h(a, prec), hb = h(b, prec);
    Real lo(prec), hi(prec);
    mpfr_sub(lo.raw(), hb.lo().raw(), ha.hi().raw(), MPFR_RNDD);
    mpfr_sub(hi.raw(), hb.hi().raw(), ha.lo().raw(), MPFR_RNDU);
    if (lo.sign() < 0) lo = Real(0L, prec);
    num = num + Interval(lo, hi);
  }
  const Interval h0 = h(Interval(Real(0L, prec)), prec), h1 = h(Interval(Real(1L, prec)), prec);
  const Interval den = h1 - h0;
  Real r = divide(num, den, prec).lo();
  if (r.sign() < 0) r = Real(0L, prec);
  if (r > Real(1L, prec)) r = Real(1L, prec);
  return r;
}

inline double fast_ratio(const QsTestMap& h, const NormalizedSet& n) {
  double num = 0;
  for (std::size_t i = 0; i < n.lo_d.size(); ++i) num += h(n.hi_d[i]) - h(n.lo_d[i]);
  return num / (h(1.0) - h(0.0));
}

inline std::vector<QsTestMap> power_family(double gamma, int effort) {
  std::vector<QsTestMap> out;
  if (effort <= 0 || gamma <= 1.0) return out;
  const double h = std::ldexp(0.25, -effort);
  const double lg = std::log(gamma);
  const long J = static_cast<long>(std::floor(lg / h));
  const long anchors = 1L << effort;
  for (long j = -J; j <= J; ++j) {
    if (j == 0) continue;
    const double kappa = std::exp(static_cast<double>(j) * h);
    if (std::max(kappa, 1.0 / kappa) > gamma) continue;
    for (long i = 0; i <= anchors; ++i) {
      QsTestMap m;
      m.kind = QsKind::PowerLaw;
      m.kappa = kappa;
      m.anchor = static_cast<double>(i) / static_cast<double>(anchors);
      m.gamma_budget = gamma;
      out.push_back(m);
    }
  }
  return out;
}

}  // namespace detail

// Certified [lower, upper] for p_gamma(X | ambient).
inline CapacityBound capacity_bounds(const IntervalSet& X, double gamma, int effort,
                                     mpfr_prec_t prec = kCapacityPrecision) {
  const double k = k_of_gamma(gamma);
  prec = std::max(prec, X.ambient.precision());
  CapacityBound cb;
  cb.gamma = gamma;
  cb.effort = effort;
  const detail::NormalizedSet n = detail::normalize_set(X, prec);
  cb.gap_count = static_cast<long>(n.gaps_lo.size());
  if (X.empty()) {
    cb.lower = Real(0L, prec);
    cb.upper = Real(0L, prec);
    cb.family_descriptor = "empty set";
    cb.witness = "any";
    return cb;
  }
  if (X.full()) {
    cb.lower = Real(1L, prec);
    cb.upper = Real(1L, prec);
    cb.family_descriptor = "whole interval";
    cb.witness = "any";
    return cb;
  }
  cb.lower = n.measure_lo;
  cb.witness = "affine";
  if (effort <= 0) {
    cb.upper = Real(1L, prec);
    cb.family_descriptor = "trivial";
    return cb;
  }

  // gap bound: every gamma-qs image of a gap G keeps at least |G|^k / k of I
  Real shrink(prec);
  const Real kr(k, prec);
  for (const Real& g : n.gaps_lo) {
    Real t(prec);
    mpfr_pow(t.raw(), g.raw(), kr.raw(), MPFR_RNDD);
    mpfr_div(t.raw(), t.raw(), kr.raw(), MPFR_RNDD);
    mpfr_add(shrink.raw(), shrink.raw(), t.raw(), MPFR_RNDD);
  }
  Real up(prec);
  mpfr_ui_sub(up.raw(), 1, shrink.raw(), MPFR_RNDU);
  cb.upper = min(up, Real(1L, prec));

  // piecewise-linear member stretching X by gamma
  if (gamma > 1.0) {
    Real gx(prec), den(prec), r(prec), g(gamma, prec);
    mpfr_mul(gx.raw(), g.raw(), n.measure_lo.raw(), MPFR_RNDD);
    // gamma m / (gamma m + 1 - m) increases with m, so m_lo gives a lower bound
    mpfr_add_ui(den.raw(), gx.raw(), 1, MPFR_RNDU);
    mpfr_sub(den.raw(), den.raw(), n.measure_lo.raw(), MPFR_RNDU);
    mpfr_div(r.raw(), gx.raw(), den.raw(), MPFR_RNDD);
    if (r > cb.lower) {
      cb.lower = r;
      std::ostringstream os;
      os.precision(17);
      os << "piecewise-linear(slope " << gamma << " on X, 1 off X)";
      cb.witness = os.str();
    }
  }

  const auto fam = detail::power_family(gamma, effort);
  std::ostringstream desc;
  desc << "affine + piecewise-linear(slope gamma on X) + power(" << fam.size() << " members, log-step 2^-"
       << (effort + 2) << ", anchors k/2^" << effort << ")";
  cb.family_descriptor = desc.str();
  if (!fam.empty()) {
    std::vector<double> vals(fam.size());
    double best = -1;
    for (std::size_t i = 0; i < fam.size(); ++i) {
      vals[i] = detail::fast_ratio(fam[i], n);
      best = std::max(best, vals[i]);
    }
    // certify every near-maximal member; ties resolve to the earliest in family order
    for (std::size_t i = 0; i < fam.size(); ++i) {
      if (vals[i] < best - 1e-9 * std::max(best, 1e-300)) continue;
      Real r = detail::certified_ratio(fam[i], X, prec);
      if (r > cb.lower) {
        cb.lower = r;
        cb.witness = fam[i].descriptor();
      }
    }
  }
  return cb;
}

// Upper bound of p_gamma(X|I) through a cover by disjoint subintervals.
inline Real tree_decompose_bound(const IntervalSet& X, const IntervalSet& cover,
                                 const std::vector<CapacityBound>& per_piece, double gamma, int effort = 1) {
  if (per_piece.size() != cover.parts.size()) {
    throw Error(ErrorKind::PreconditionViolated, "one bound per cover piece required");
  }
  for (const auto& p : X.parts) {
    bool inside = false;
    for (const auto& c : cover.parts) {
      if (c.contains(p)) {
        inside = true;
        break;
      }
    }
    if (!inside) throw Error(ErrorKind::CoverViolation, "X is not inside the cover");
  }
  const mpfr_prec_t prec = std::max(kCapacityPrecision, X.ambient.precision());
  if (X.empty()) return Real(0L, prec);
  Real worst(prec);
  for (std::size_t j = 0; j < per_piece.size(); ++j) {
    bool touched = false;
    for (const auto& p : X.parts) touched = touched || cover.parts[j].contains(p);
    if (touched) worst = max(worst, per_piece[j].upper);
  }
  const Real top = capacity_bounds(cover, gamma, effort, prec).upper;
  Real out(prec);
  mpfr_mul(out.raw(), top.raw(), worst.raw(), MPFR_RNDU);
  return out;
}

// Same, computing the per-piece bounds of X inside each cover piece.
inline Real tree_decompose_bound(const IntervalSet& X, const IntervalSet& cover, double gamma, int effort = 1) {
  std::vector<CapacityBound> per;
  for (const auto& c : cover.parts) per.push_back(capacity_bounds(X.restrict_to(c), gamma, effort));
  return tree_decompose_bound(X, cover, per, gamma, effort);
}

struct PullbackTrace {
  double neighborhood = 0;     // radius of V relative to |I_{n+1}|
  double pieces_per_side = 0;
  double distortion = 0;       // of R_n off V
  double image_share = 0;      // lower bound on |R_n(W)| / |I_n|
  double piece_capacity = 0;   // capacity of the pullback inside each piece
  double central_capacity = 0; // capacity of V
};

struct PullbackBound {
  double bound = 0;
  PullbackTrace trace;
};

// Capacity of the pullback of X by the central branch, given p(X|I_n) < delta.
inline PullbackBound pullback_capacity_bound(double delta, int n, const ExponentConstants& c) {
  if (!(delta > 0 && delta < 1)) throw Error(ErrorKind::PreconditionViolated, "delta must lie in (0,1)");
  if (n < 1) throw Error(ErrorKind::PreconditionViolated, "level must be >= 1");
  const double ln_threshold = n == 1 ? 0.0 : -c.b * std::log(static_cast<double>(n));
  if (!(std::log(delta) < ln_threshold)) {
    throw Error(ErrorKind::HypothesisViolated, "delta >= n^-b: the pullback estimate is not claimed");
  }
  const double at = c.a_tilde, bt = c.b_tilde;
  PullbackBound out;
  out.bound = std::pow(delta, at * at * at);
  out.trace.neighborhood = std::pow(delta, at);
  out.trace.pieces_per_side = std::pow(static_cast<double>(n), bt) * std::pow(delta, -at);
  out.trace.distortion = 2 * std::pow(delta, at);
  out.trace.image_share = std::pow(delta, 2 * at) * std::pow(static_cast<double>(n), -3 * bt);
  out.trace.piece_capacity = std::pow(delta, 3.0) * std::pow(static_cast<double>(n), -3 * bt * bt);
  out.trace.central_capacity = 2 * std::pow(delta, at * at);
  return out;
}

}  // namespace qnest
