#pragma once

// Regular / Collet-Eckmann classification from the critical orbit: the
// expansion exponents a_k, the recurrence exponents, and the pass/fail rows
// for the distance and high-time bounds of iterated central returns.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qnest/constants.hpp"
#include "qnest/dynamics.hpp"
#include "qnest/nest.hpp"

namespace qnest {

struct ExponentTrace {
  long horizon = 0;
  long window = 0;
  std::vector<double> a_seq;  // a_seq[k-1] = ln|Df^k(f(0))| / k
  std::vector<long> v;        // nest times used for e_n
  std::vector<double> e_seq;  // e_n = a_{v_n - 1}, nothing recorded when v_n < 2
  double liminf_estimate = 0;
  double liminf_half = 0;     // same statistic at horizon N/2
  double stability_delta = 0;
};

namespace detail {

inline double trailing_min(const std::vector<double>& s, long upto, long window) {
  double m = INFINITY;
  for (long k = std::max<long>(1, upto - window + 1); k <= upto; ++k) m = std::min(m, s[k - 1]);
  return m;
}

inline OrbitSample critical_value_orbit(const MapParam& m, long N) {
  OrbitSample s = iterate(m, m.a, static_cast<std::size_t>(N));
  if (s.zero_hit && static_cast<long>(*s.zero_hit) < N) {
    const long t = static_cast<long>(*s.zero_hit) + 1;  // f^t(0) = 0
    throw Error(ErrorKind::CriticalOrbitHitsZero, "critical orbit returns to 0 at time " + std::to_string(t), t);
  }
  return s;
}

}  // namespace detail

inline ExponentTrace ce_exponent(const MapParam& m, long N, long window, const std::vector<long>& v = {}) {
  if (!(N >= window && window >= 1)) throw Error(ErrorKind::PreconditionViolated, "need N >= window >= 1");
  const OrbitSample s = detail::critical_value_orbit(m, N);
  ExponentTrace t;
  t.horizon = N;
  t.window = window;
  t.a_seq.reserve(N);
  for (long k = 1; k <= N; ++k) t.a_seq.push_back(s.logderiv(k)->to_double() / static_cast<double>(k));
  t.liminf_estimate = detail::trailing_min(t.a_seq, N, window);
  const long half = std::max<long>(1, N / 2);
  t.liminf_half = detail::trailing_min(t.a_seq, half, std::max<long>(1, std::min(window, half) / 2));
  t.stability_delta = std::abs(t.liminf_estimate - t.liminf_half);
  for (long vn : v) {
    if (vn >= 2 && vn - 1 <= N) {
      t.v.push_back(vn);
      t.e_seq.push_back(t.a_seq[vn - 2]);
    }
  }
  return t;
}

// e_{n+1} against e_n (v_n - 1)/(v_{n+1} - 1) + (lambda/2)(v_{n+1} - v_n)/(v_{n+1} - 1).
struct ERecursionRow {
  long v_n = 0, v_next = 0;
  double e_n = 0, e_next = 0, bound = 0;
  bool holds = false;
};

inline std::vector<ERecursionRow> e_recursion_report(const ExponentTrace& t, double lambda_n0) {
  std::vector<ERecursionRow> rows;
  for (std::size_t i = 0; i + 1 < t.v.size(); ++i) {
    ERecursionRow r;
    r.v_n = t.v[i];
    r.v_next = t.v[i + 1];
    r.e_n = t.e_seq[i];
    r.e_next = t.e_seq[i + 1];
    const double d = static_cast<double>(r.v_next - 1);
    r.bound = r.e_n * static_cast<double>(r.v_n - 1) / d + lambda_n0 / 2 * static_cast<double>(r.v_next - r.v_n) / d;
    r.holds = r.e_next >= r.bound;
    rows.push_back(r);
  }
  return rows;
}

struct RecurrenceViolation {
  long k = 0;
  double ln_abs = 0;  // ln|f^k(0)|
};

struct RecurrenceTrace {
  long horizon = 0;
  std::vector<double> r_seq;  // r_seq[n-2] = -ln|f^n(0)| / ln n
  double limsup_estimate = 0;
  double limsup_half = 0;
  double stability_delta = 0;
  double lower_exponent_witness = 0;  // a
  double upper_exponent_witness = 0;  // 3 b^3
  long violations = 0;                // k with |f^k(0)| <= k^{-3b^3}
  std::vector<RecurrenceViolation> first_violations;
};

inline RecurrenceTrace recurrence_exponent(const MapParam& m, long N, const ExponentConstants& c) {
  if (N < 2) throw Error(ErrorKind::PreconditionViolated, "need N >= 2");
  const OrbitSample s = detail::critical_value_orbit(m, N);
  RecurrenceTrace t;
  t.horizon = N;
  t.lower_exponent_witness = c.a;
  t.upper_exponent_witness = 3 * c.b * c.b * c.b;
  t.r_seq.reserve(N - 1);
  for (long n = 2; n <= N; ++n) {
    // f^n(0) = f^{n-1}(a)
    const double la = log(abs(s.points[n - 1])).to_double();
    const double ln_n = std::log(static_cast<double>(n));
    t.r_seq.push_back(-la / ln_n);
    if (!(la > -t.upper_exponent_witness * ln_n)) {
      ++t.violations;
      if (t.first_violations.size() < 16) t.first_violations.push_back({n, la});
    }
  }
  auto tail_max = [&](long upto) {
    double mx = 0;  // the recurrence exponent is never below 0 in the limit
    for (long n = std::max<long>(2, upto / 2); n <= upto; ++n) mx = std::max(mx, t.r_seq[n - 2]);
    return mx;
  };
  t.limsup_estimate = tail_max(N);
  t.limsup_half = tail_max(std::max<long>(2, N / 2));
  t.stability_delta = std::abs(t.limsup_estimate - t.limsup_half);
  return t;
}

// Rows for R_n^i(0), i = 1..s_n, at levels with a known c_{n-1}.
struct ReturnRecurrenceRow {
  int n = 0;
  long i = 0;
  long k_i = 0;          // R_n^i(0) = f^{k_i}(0)
  double ln_abs = 0;     // ln|R_n^i(0)|
  double ln_c_prev = 0;
  bool distance_ok = false;
  bool high_time_ok = false;
  std::optional<bool> ratio_ok;  // k_i / i > c^{-a/2} / 2, only for i > 1/c_{n-1}
};

inline std::vector<ReturnRecurrenceRow> return_branch_recurrence(const std::vector<ReturnSystem>& levels,
                                                                 const ExponentConstants& c) {
  std::vector<ReturnRecurrenceRow> rows;
  bool any_level = false;
  for (std::size_t idx = 1; idx < levels.size(); ++idx) {
    const ReturnSystem& rs = levels[idx];
    if (!levels[idx - 1].c || !rs.v || !rs.critical_address || !rs.crit) continue;
    any_level = true;
    const double lc = log(*levels[idx - 1].c).to_double();
    const double L = -lc;  // ln(1/c_{n-1})
    long k = *rs.v;
    const auto& d = rs.critical_address->entries();
    for (std::size_t i = 1; i <= d.size(); ++i) {
      ReturnRecurrenceRow r;
      r.n = rs.level;
      r.i = static_cast<long>(i);
      r.k_i = k;
      r.ln_c_prev = lc;
      r.ln_abs = log(abs(rs.crit->at(k).v)).to_double();
      const double li = std::log(static_cast<double>(i));
      r.distance_ok = r.ln_abs / lc < c.b * c.b * (1 + li / L);
      r.high_time_ok = std::log(static_cast<double>(k)) / L > c.a / 3 * (1 + li / L);
      if (static_cast<double>(i) > std::exp(L)) {
        r.ratio_ok = static_cast<double>(k) / static_cast<double>(i) > std::exp(L * c.a / 2) / 2;
      }
      rows.push_back(r);
      k += rs.branch(d[i - 1]).return_time;
    }
  }
  if (!any_level) throw Error(ErrorKind::InsufficientDepth, "no level with a resolved critical landing and c_{n-1}");
  return rows;
}

// ---------------------------------------------------------------------------

enum class VerdictKind { Regular, ColletEckmannCandidate, NonRecurrentCE, Undetermined };

inline std::string to_string(VerdictKind v) {
  switch (v) {
    case VerdictKind::Regular: return "Regular";
    case VerdictKind::ColletEckmannCandidate: return "ColletEckmannCandidate";
    case VerdictKind::NonRecurrentCE: return "NonRecurrentCE";
    case VerdictKind::Undetermined: return "Undetermined";
  }
  return "?";
}

struct ClassifyBudgets {
  int max_period = 64;
  int max_transient = 4096;
  NestBudgets nest = [] {
    NestBudgets b;
    b.depth = 2;
    b.time_budget = 16;
    return b;
  }();
  long N = 1000;
  long window = 0;       // 0: N / 4
  long recurrence_N = 0; // 0: N
  double theta = 0.01;
};

struct ParameterVerdict {
  VerdictKind kind = VerdictKind::Undetermined;
  std::string reason;                   // machine-readable, set for Undetermined
  std::vector<std::string> reasons;     // notes gathered along the pipeline
  std::optional<CycleReport> cycle;
  std::optional<double> lambda_est, recurrence_est, stability_delta;
  bool recurrence_invoked = false;
  int nest_depth = 0;
  std::optional<Termination> nest_termination;
  std::vector<double> c;                // c_1..c_depth
  mpfr_prec_t precision = 0;
  ClassifyBudgets budgets;
};

inline ParameterVerdict classify_parameter(const Real& a, const ClassifyBudgets& b = {},
                                           const ExponentConstants& consts = ExponentConstants::practical()) {
  ParameterVerdict out;
  out.budgets = b;
  out.precision = a.precision();
  auto undetermined = [&](std::string why) {
    out.kind = VerdictKind::Undetermined;
    out.reason = why;
    out.reasons.push_back(std::move(why));
    return out;
  };
  const Real lo = Real::parse("-0.25", a.precision()), hi(2L, a.precision());
  if (a < lo || a > hi) return undetermined("out-of-range");
  if (a == lo) return undetermined("parabolic");

  MapParam m = invariant_interval(a);
  try {
    if (auto cyc = find_attracting_cycle(m, b.max_period, b.max_transient)) {
      out.kind = VerdictKind::Regular;
      out.cycle = std::move(cyc);
      return out;
    }
  } catch (const Error& e) {
    out.reasons.push_back("cycle search: " + std::string(to_string(e.kind())));
  }

  NestReport rep;
  try {
    rep = build_nest(m, b.nest);
  } catch (const Error& e) {
    return undetermined(e.kind() == ErrorKind::PrecisionFailure ? "precision" : "nest-error");
  }
  out.nest_depth = static_cast<int>(rep.levels.size());
  out.nest_termination = rep.termination;
  for (const auto& l : rep.levels) {
    if (l.c) out.c.push_back(l.c->to_double());
  }
  switch (rep.termination) {
    case Termination::RenormalizationDetected: return undetermined("cascade");
    case Termination::ParabolicObstruction: return undetermined("parabolic");
    case Termination::PrecisionFailure: return undetermined("precision");
    case Termination::RegularDetected: {
      // certify the cycle before calling it regular
      try {
        if (auto cyc = find_attracting_cycle(m, std::max(b.max_period, rep.period.value_or(1)), 8 * b.max_transient)) {
          out.kind = VerdictKind::Regular;
          out.cycle = std::move(cyc);
          return out;
        }
      } catch (const Error&) {
      }
      return undetermined("regular-uncertified");
    }
    case Termination::BudgetExhausted: break;
  }

  std::vector<long> v;
  for (const auto& l : rep.levels) {
    if (l.v) v.push_back(*l.v);
  }
  const long window = b.window > 0 ? b.window : std::max<long>(1, b.N / 4);
  try {
    const ExponentTrace et = ce_exponent(m, b.N, window, v);
    out.lambda_est = et.liminf_estimate;
    out.stability_delta = et.stability_delta;
    if (!(et.liminf_estimate > b.theta)) return undetermined("low-exponent");
    const RecurrenceTrace rt = recurrence_exponent(m, b.recurrence_N > 0 ? b.recurrence_N : b.N, consts);
    out.recurrence_invoked = true;
    out.recurrence_est = rt.limsup_estimate;
    if (rt.limsup_estimate <= 0) {
      out.kind = VerdictKind::NonRecurrentCE;
    } else if (rt.limsup_estimate < rt.upper_exponent_witness) {
      out.kind = VerdictKind::ColletEckmannCandidate;
    } else {
      return undetermined("recurrence-too-fast");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CriticalOrbitHitsZero) return undetermined("superattracting");
    return undetermined("precision");
  }
  return out;
}

}  // namespace qnest
