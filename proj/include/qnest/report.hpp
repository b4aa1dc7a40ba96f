#pragma once

// JSON and CSV emission. Keys keep insertion order so identical inputs give
// byte-identical files. Reals are written as shortest round-trip decimals at
// their own precision.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qnest/branch_stats.hpp"
#include "qnest/capacity.hpp"
#include "qnest/classify.hpp"
#include "qnest/nest.hpp"
#include "qnest/parawindow.hpp"

namespace qnest {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr const char* kCsvSchema = "qnest-csv-1";

namespace report {

inline Json real(const Real& x) { return x.to_string(); }

inline Json interval(const Interval& x) { return Json{{"lo", real(x.lo())}, {"hi", real(x.hi())}}; }

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

// doubles that may be infinite or NaN do not fit JSON numbers
inline Json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline Json constants(const ExponentConstants& c) {
  return Json{{"profile", to_string(c.profile)}, {"a", num(c.a)},         {"b", num(c.b)},
              {"a_tilde", num(c.a_tilde)},      {"b_tilde", num(c.b_tilde)}, {"gamma", c.gamma},
              {"gamma0", c.gamma0},             {"k", c.k}};
}

inline Json branch(const ReturnBranch& b) {
  return Json{{"index", b.index},
              {"lo", real(b.domain.lo())},
              {"hi", real(b.domain.hi())},
              {"time", b.return_time},
              {"orientation", b.orientation}};
}

inline Json level(const ReturnSystem& rs, bool with_branches) {
  Json j;
  j["level"] = rs.level;
  j["p"] = real(rs.p());
  j["interval"] = interval(rs.interval);
  j["time_budget"] = rs.time_budget;
  j["budget_exceeded"] = rs.budget_exceeded;
  j["branch_count"] = rs.branches.size();
  j["uncovered_count"] = rs.uncovered.size();
  j["uncovered_measure"] = real(rs.uncovered_measure);
  j["v"] = opt(rs.v);
  j["tau"] = opt(rs.tau);
  j["s"] = opt(rs.s);
  j["c"] = rs.c ? real(*rs.c) : Json(nullptr);
  j["gape"] = rs.gape ? interval(*rs.gape) : Json(nullptr);
  j["critical_address"] = rs.critical_address ? Json(rs.critical_address->entries()) : Json(nullptr);
  j["landing_issue"] = rs.landing_issue ? Json(std::string(to_string(*rs.landing_issue))) : Json(nullptr);
  if (!rs.landing_note.empty()) j["landing_note"] = rs.landing_note;
  if (rs.central) {
    j["central"] = Json{{"lo", real(rs.central->domain.lo())},
                        {"hi", real(rs.central->domain.hi())},
                        {"time", rs.central->return_time},
                        {"image_sign", rs.central->image_sign}};
  }
  if (with_branches) {
    Json bs = Json::array();
    for (const auto& b : rs.branches) bs.push_back(branch(b));
    j["branches"] = std::move(bs);
  }
  return j;
}

inline Json nest(const NestReport& rep, bool with_branches = true) {
  Json j;
  j["parameter"] = Json{{"a", real(rep.param.a)}, {"precision", rep.param.a.precision()}};
  j["beta"] = real(rep.param.beta);
  j["termination"] = to_string(rep.termination);
  j["reason"] = rep.reason;
  j["period"] = opt(rep.period);
  j["precision_used"] = rep.precision_used;
  Json ls = Json::array();
  for (const auto& l : rep.levels) ls.push_back(level(l, with_branches));
  j["levels"] = std::move(ls);
  return j;
}

inline Json capacity(const CapacityBound& b) {
  return Json{{"gamma", b.gamma},
              {"lower", real(b.lower)},
              {"upper", real(b.upper)},
              {"effort", b.effort},
              {"family_descriptor", b.family_descriptor},
              {"witness", b.witness},
              {"gap_count", b.gap_count}};
}

inline Json verdict(const Real& a, const ParameterVerdict& v) {
  Json j;
  j["a"] = real(a);
  j["precision"] = v.precision;
  j["budgets"] = Json{{"max_period", v.budgets.max_period},
                      {"max_transient", v.budgets.max_transient},
                      {"time_budget", v.budgets.nest.time_budget},
                      {"count_budget", v.budgets.nest.count_budget},
                      {"depth", v.budgets.nest.depth},
                      {"N", v.budgets.N},
                      {"window", v.budgets.window > 0 ? v.budgets.window : std::max<long>(1, v.budgets.N / 4)},
                      {"theta", v.budgets.theta}};
  j["verdict"] = to_string(v.kind);
  j["lambda_est"] = v.lambda_est ? num(*v.lambda_est) : Json(nullptr);
  j["recurrence_est"] = v.recurrence_est ? num(*v.recurrence_est) : Json(nullptr);
  j["stability_delta"] = v.stability_delta ? num(*v.stability_delta) : Json(nullptr);
  j["nest_depth"] = v.nest_depth;
  j["nest_termination"] = v.nest_termination ? Json(to_string(*v.nest_termination)) : Json(nullptr);
  j["c"] = v.c;
  j["reasons"] = v.reasons;
  if (v.kind == VerdictKind::Undetermined) j["reason"] = v.reason;
  if (v.cycle) {
    Json pts = Json::array();
    for (const auto& x : v.cycle->points) pts.push_back(real(x));
    j["cycle"] = Json{{"period", v.cycle->period},
                      {"multiplier", real(v.cycle->multiplier)},
                      {"multiplier_bound", real(v.cycle->multiplier_bound)},
                      {"points", std::move(pts)}};
  }
  return j;
}

inline Json check(const Check& c) { return Json{{"ok", c.ok}, {"witness", c.witness}}; }

inline Json landing_flags(const LandingFlags& f) {
  Json j{{"m", f.m}, {"LS1", check(f.ls1)}, {"LS2", check(f.ls2)}, {"LS3", check(f.ls3)},
         {"LF1", check(f.lf1)}, {"LS", f.ls}, {"LF", f.lf}};
  if (f.le) {
    j["LE1"] = check(*f.le1);
    j["LE2"] = check(*f.le2);
    j["LE"] = *f.le;
  }
  if (f.lc) {
    j["LC1"] = check(*f.lc1);
    j["LC2"] = check(*f.lc2);
    j["LC3"] = check(*f.lc3);
    j["LC4"] = check(*f.lc4);
    j["LC5"] = check(*f.lc5);
    j["LC"] = *f.lc;
  }
  return j;
}

inline Json samples(const std::vector<TimeSample>& s) {
  Json a = Json::array();
  for (const auto& x : s) {
    a.push_back(Json{{"k", x.k}, {"lower", real(x.bound.lower)}, {"upper", real(x.bound.upper)}});
  }
  return a;
}

inline Json time_stats(const TimeStats& t) {
  return Json{{"level", t.level},
              {"gamma_A", t.gamma_A},
              {"gamma_B", t.gamma_B},
              {"A", samples(t.A)},
              {"B", samples(t.B)},
              {"A_tail_partial", t.A_tail_partial},
              {"A_certified_through", t.A_certified_through == LONG_MAX ? Json("all") : Json(t.A_certified_through)},
              {"B_complete_through", t.B_complete_through},
              {"landing_components", t.landing_components},
              {"zeta_cap", num(t.zeta_cap)},
              {"zeta", t.zeta ? num(*t.zeta) : Json(nullptr)},
              {"alpha", t.alpha ? num(*t.alpha) : Json(nullptr)}};
}

inline Json checklist(const std::vector<ChecklistItem>& items) {
  Json a = Json::array();
  for (const auto& it : items) {
    Json j{{"name", it.name},        {"status", to_string(it.status)}, {"lower", num(it.lower)},
           {"upper", num(it.upper)}, {"bound", num(it.bound)},         {"log_scale", it.log_scale}};
    if (!it.note.empty()) j["note"] = it.note;
    a.push_back(std::move(j));
  }
  return a;
}

inline Json window(const ParaWindow& w) {
  return Json{{"level", w.level},
              {"target", w.target},
              {"seed", real(w.seed)},
              {"lo_inner", real(w.lo_inner)},
              {"lo_outer", real(w.lo_outer)},
              {"hi_inner", real(w.hi_inner)},
              {"hi_outer", real(w.hi_outer)},
              {"width", real(w.width())},
              {"lo_at_boundary", w.lo_at_boundary},
              {"hi_at_boundary", w.hi_at_boundary},
              {"probes", w.probes},
              {"seed_margin", num(w.seed_margin)},
              {"precision", w.precision}};
}

inline Json measure(const MeasureEstimate& e) {
  return Json{{"estimate", e.estimate}, {"radius", e.radius},       {"hits", e.hits},
              {"trials", e.trials},     {"horizon", e.horizon},     {"tail_start", e.tail_start},
              {"seed", e.seed}};
}

inline Json skeleton(const SkeletonReport& s) {
  return Json{{"landings", s.landings},
              {"containment_violations", s.containment_violations},
              {"vg_branches", s.vg_branches},
              {"identity_checks", s.identity_checks},
              {"identity_violations", s.identity_violations},
              {"time_bound_violations", s.time_bound_violations},
              {"max_time_ratio", num(s.max_time_ratio)}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// shortest round-trip decimal for a double
inline std::string dstr(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string address(const std::vector<long>& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? " " : "") + std::to_string(d[i]);
  return s;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row(header); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_field(cells[i]);
    for (std::size_t i = cells.size(); i < cols_; ++i) out_ << ",";
    out_ << "\n";
  }
  std::string str() const { return out_.str(); }

 private:
  std::size_t cols_;
  std::ostringstream out_;
};

}  // namespace report
}  // namespace qnest
