#pragma once

// Run configuration and command implementations behind the qnest binary.
// Precedence: built-in defaults, then QNEST_PRECISION, then --config, then flags.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qnest/branch_stats.hpp"
#include "qnest/capacity.hpp"
#include "qnest/classify.hpp"
#include "qnest/nest.hpp"
#include "qnest/parallel.hpp"
#include "qnest/parawindow.hpp"
#include "qnest/report.hpp"

namespace qnest::cli {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"nest", "classify", "sweep", "capacity", "parawindow", "stats"};
  return c;
}

struct Budgets {
  int time_budget = 16;
  int count_budget = 4096;
  int depth = 0;  // 0: 3 for nest/stats/parawindow, 2 for classify/sweep
  long N = 1000;
  long window = 0;  // 0: N/4
  int effort = 1;
};

struct ConstantsConfig {
  std::string profile = "practical";
  double a = 0.5, b = 2, a_tilde = 0.5, b_tilde = 2;
  double gamma = 1.1, gamma0 = 1;
};

struct RunConfig {
  std::string command = "nest";
  std::string a = "1.9";
  std::string a_min = "1.5", a_max = "2";
  long grid = 11;
  long precision_bits = 256;
  Budgets budgets;
  ConstantsConfig constants;
  std::uint64_t seed = 1;
  std::string output = "-";
  std::string format = "json";
  int threads = 1;
  bool timing = false;
  int level = 2;
  std::vector<long> target;  // empty: the base's own branch
  std::string set = "0:0.5";
  std::string ambient = "0:1";
};

inline long default_precision() {
  if (const char* e = std::getenv("QNEST_PRECISION")) {
    char* end = nullptr;
    const long v = std::strtol(e, &end, 10);
    if (end && *end == '\0' && v > 0) return v;
    throw Error(ErrorKind::ConfigError, std::string("QNEST_PRECISION is not a positive integer: ") + e);
  }
  return 256;
}

inline int effective_depth(const RunConfig& c) {
  if (c.budgets.depth > 0) return c.budgets.depth;
  return (c.command == "classify" || c.command == "sweep") ? 2 : 3;
}

// threads and timing are execution settings and stay out of the embedded
// config, so artifacts do not depend on how many workers produced them
inline Json to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["a"] = c.a;
  j["a_min"] = c.a_min;
  j["a_max"] = c.a_max;
  j["grid"] = c.grid;
  j["precision_bits"] = c.precision_bits;
  j["budgets"] = Json{{"time_budget", c.budgets.time_budget}, {"count_budget", c.budgets.count_budget},
                      {"depth", effective_depth(c)},           {"N", c.budgets.N},
                      {"window", c.budgets.window > 0 ? c.budgets.window : std::max<long>(1, c.budgets.N / 4)},
                      {"effort", c.budgets.effort}};
  j["constants"] = Json{{"profile", c.constants.profile}, {"a", c.constants.a},          {"b", c.constants.b},
                        {"a_tilde", c.constants.a_tilde}, {"b_tilde", c.constants.b_tilde}, {"gamma", c.constants.gamma},
                        {"gamma0", c.constants.gamma0}};
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["format"] = c.format;
  j["level"] = c.level;
  j["target"] = c.target;
  j["set"] = c.set;
  j["ambient"] = c.ambient;
  return j;
}

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  long line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void bad_field(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigError, "config field '" + path + "': " + what);
}

template <class T>
void read(const Json& j, const std::string& key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  const std::string p = path.empty() ? key : path + "." + key;
  if constexpr (std::is_same_v<T, std::string>) {
    if (v.is_string()) {
      out = v.get<std::string>();
    } else if (v.is_number()) {
      out = v.dump();  // numbers are accepted for parameters
    } else {
      bad_field(p, "expected a string");
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) bad_field(p, "expected true or false");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad_field(p, "expected an integer");
    out = v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) bad_field(p, "expected a number");
    out = v.get<T>();
  } else {
    if (!v.is_array()) bad_field(p, "expected an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer()) bad_field(p, "expected an array of integers");
      out.push_back(e.get<long>());
    }
  }
}

inline void only_known(const Json& j, const std::vector<std::string>& keys, const std::string& path) {
  if (!j.is_object()) bad_field(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      bad_field(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
    }
  }
}

}  // namespace detail

inline void apply_json(RunConfig& c, const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, "config is not valid JSON at " + detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  detail::only_known(j,
                     {"command", "a", "a_min", "a_max", "grid", "precision_bits", "budgets", "constants", "seed",
                      "output", "format", "threads", "timing", "level", "target", "set", "ambient"},
                     "");
  using detail::read;
  read(j, "command", "", c.command);
  read(j, "a", "", c.a);
  read(j, "a_min", "", c.a_min);
  read(j, "a_max", "", c.a_max);
  read(j, "grid", "", c.grid);
  read(j, "precision_bits", "", c.precision_bits);
  if (j.contains("budgets")) {
    const Json& b = j["budgets"];
    detail::only_known(b, {"time_budget", "count_budget", "depth", "N", "window", "effort"}, "budgets");
    read(b, "time_budget", "budgets", c.budgets.time_budget);
    read(b, "count_budget", "budgets", c.budgets.count_budget);
    read(b, "depth", "budgets", c.budgets.depth);
    read(b, "N", "budgets", c.budgets.N);
    read(b, "window", "budgets", c.budgets.window);
    read(b, "effort", "budgets", c.budgets.effort);
  }
  if (j.contains("constants")) {
    const Json& k = j["constants"];
    detail::only_known(k, {"profile", "a", "b", "a_tilde", "b_tilde", "gamma", "gamma0"}, "constants");
    read(k, "profile", "constants", c.constants.profile);
    read(k, "a", "constants", c.constants.a);
    read(k, "b", "constants", c.constants.b);
    read(k, "a_tilde", "constants", c.constants.a_tilde);
    read(k, "b_tilde", "constants", c.constants.b_tilde);
    read(k, "gamma", "constants", c.constants.gamma);
    read(k, "gamma0", "constants", c.constants.gamma0);
  }
  read(j, "seed", "", c.seed);
  read(j, "output", "", c.output);
  read(j, "format", "", c.format);
  read(j, "threads", "", c.threads);
  read(j, "timing", "", c.timing);
  read(j, "level", "", c.level);
  read(j, "target", "", c.target);
  read(j, "set", "", c.set);
  read(j, "ambient", "", c.ambient);
}

inline ExponentConstants make_constants(const ConstantsConfig& k) {
  if (k.profile == "practical") return ExponentConstants::practical(k.a, k.b, k.a_tilde, k.b_tilde, k.gamma, k.gamma0);
  if (k.profile == "faithful") return ExponentConstants::faithful(k.gamma, k.gamma0);
  throw Error(ErrorKind::ConfigError, "config field 'constants.profile': expected practical or faithful");
}

inline Real parse_param(const std::string& text, const std::string& field, long prec) {
  Real a(static_cast<mpfr_prec_t>(prec));
  try {
    a = Real::parse(text, static_cast<mpfr_prec_t>(prec));
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigError, "config field '" + field + "': not a decimal number: " + text);
  }
  const Real lo = Real::parse("-0.25", static_cast<mpfr_prec_t>(prec)), hi(2L, static_cast<mpfr_prec_t>(prec));
  if (!a.is_finite() || a < lo || a > hi) {
    throw Error(ErrorKind::ParamOutOfRange, "parameter " + text + " outside [-1/4, 2]");
  }
  return a;
}

inline std::vector<Interval> parse_intervals(const std::string& text, const std::string& field, mpfr_prec_t prec) {
  std::vector<Interval> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorKind::ConfigError, "config field '" + field + "': expected lo:hi pieces, got " + item);
    }
    try {
      const Real lo = Real::parse(item.substr(0, colon), prec), hi = Real::parse(item.substr(colon + 1), prec);
      if (!(lo <= hi)) throw Error(ErrorKind::ConfigError, "");
      out.emplace_back(lo, hi);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "config field '" + field + "': bad piece " + item);
    }
  }
  return out;
}

inline void validate(const RunConfig& c) {
  if (std::find(commands().begin(), commands().end(), c.command) == commands().end()) {
    throw Error(ErrorKind::ConfigError, "config field 'command': unknown command " + c.command);
  }
  if (c.precision_bits < kMinPrecisionBits) {
    throw Error(ErrorKind::ConfigError, "config field 'precision_bits': at least " + std::to_string(kMinPrecisionBits));
  }
  if (c.format != "json" && c.format != "csv") throw Error(ErrorKind::ConfigError, "config field 'format': json or csv");
  if (c.grid < 0) throw Error(ErrorKind::ConfigError, "config field 'grid': must be >= 0");
  if (c.threads < 1) throw Error(ErrorKind::ConfigError, "config field 'threads': must be >= 1");
  if (c.budgets.time_budget < 1 || c.budgets.count_budget < 1 || c.budgets.depth < 0) {
    throw Error(ErrorKind::ConfigError, "config field 'budgets': time/count budgets must be positive");
  }
  if (c.budgets.N < 2 || c.budgets.window < 0 || c.budgets.window > c.budgets.N) {
    throw Error(ErrorKind::ConfigError, "config field 'budgets.N'/'budgets.window': need N >= 2 and window <= N");
  }
  if (c.budgets.effort < 0 || c.budgets.effort > 8) {
    throw Error(ErrorKind::ConfigError, "config field 'budgets.effort': 0..8");
  }
  if (c.level < 1) throw Error(ErrorKind::ConfigError, "config field 'level': must be >= 1");
  make_constants(c.constants);
  const mpfr_prec_t p = static_cast<mpfr_prec_t>(c.precision_bits);
  if (c.command == "sweep") {
    const Real lo = parse_param(c.a_min, "a_min", p), hi = parse_param(c.a_max, "a_max", p);
    if (lo > hi) throw Error(ErrorKind::ConfigError, "config field 'a_min': exceeds a_max");
  } else if (c.command != "capacity") {
    parse_param(c.a, "a", p);
  }
}

inline NestBudgets nest_budgets(const RunConfig& c) {
  NestBudgets b;
  b.time_budget = c.budgets.time_budget;
  b.count_budget = c.budgets.count_budget;
  b.depth = effective_depth(c);
  return b;
}

inline ClassifyBudgets classify_budgets(const RunConfig& c) {
  ClassifyBudgets b;
  b.nest = nest_budgets(c);
  b.N = c.budgets.N;
  b.window = c.budgets.window;
  return b;
}

struct Output {
  std::string body;                                        // main artifact
  std::vector<std::pair<std::string, std::string>> extra;  // (path suffix, content)
};

inline Json envelope(const RunConfig& c, Json result) {
  Json j;
  j["tool"] = "qnest";
  j["version"] = kToolVersion;
  j["profile"] = c.constants.profile;
  j["config"] = to_json(c);
  j["constants"] = report::constants(make_constants(c.constants));
  j["result"] = std::move(result);
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// CSV artifacts carry the same provenance as comment lines
inline std::string csv_preamble(const RunConfig& c) {
  return "# tool=qnest version=" + std::string(kToolVersion) + " schema=" + kCsvSchema +
         " profile=" + c.constants.profile + "\n# config=" + to_json(c).dump() + "\n";
}

// --- commands ---------------------------------------------------------------

inline Output cmd_nest(const RunConfig& c) {
  const Real a = parse_param(c.a, "a", c.precision_bits);
  const NestReport rep = build_nest(invariant_interval(a), nest_budgets(c));
  if (c.format == "csv") {
    report::Csv csv({"level", "index", "lo", "hi", "time", "orientation"});
    for (const auto& l : rep.levels) {
      for (const auto& b : l.branches) {
        csv.row({std::to_string(l.level), std::to_string(b.index), b.domain.lo().to_string(),
                 b.domain.hi().to_string(), std::to_string(b.return_time), std::to_string(b.orientation)});
      }
    }
    return {csv_preamble(c) + csv.str(), {}};
  }
  return {dump(envelope(c, report::nest(rep))), {}};
}

inline Output cmd_classify(const RunConfig& c) {
  const Real a = parse_param(c.a, "a", c.precision_bits);
  const auto t0 = std::chrono::steady_clock::now();
  const ParameterVerdict v = classify_parameter(a, classify_budgets(c), make_constants(c.constants));
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  Json r = report::verdict(a, v);
  if (c.timing) r["runtime_ms"] = ms;
  if (c.format == "csv") {
    report::Csv csv({"a", "verdict", "lambda_est", "recurrence_est", "nest_depth", "reason"});
    csv.row({a.to_string(), to_string(v.kind), v.lambda_est ? report::dstr(*v.lambda_est) : "",
             v.recurrence_est ? report::dstr(*v.recurrence_est) : "", std::to_string(v.nest_depth), v.reason});
    return {csv_preamble(c) + csv.str(), {}};
  }
  return {dump(envelope(c, r)), {}};
}

struct SweepRow {
  Real a;
  ParameterVerdict v;
  double ms = 0;
  std::string error;
};

inline std::vector<Real> sweep_grid(const RunConfig& c) {
  const mpfr_prec_t p = static_cast<mpfr_prec_t>(c.precision_bits);
  const Real lo = parse_param(c.a_min, "a_min", p), hi = parse_param(c.a_max, "a_max", p);
  std::vector<Real> g;
  for (long i = 0; i < c.grid; ++i) {
    g.push_back(c.grid == 1 ? lo : lo + (hi - lo) * i / (c.grid - 1));
  }
  return g;
}

inline Output cmd_sweep(const RunConfig& c) {
  const std::vector<Real> grid = sweep_grid(c);
  std::vector<SweepRow> rows(grid.size());
  const ClassifyBudgets b = classify_budgets(c);
  const ExponentConstants k = make_constants(c.constants);
  parallel_for(grid.size(), c.threads, [&](std::size_t i) {
    rows[i].a = grid[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rows[i].v = classify_parameter(grid[i], b, k);
    } catch (const std::exception& e) {
      rows[i].v.kind = VerdictKind::Undetermined;
      rows[i].v.reason = "error";
      rows[i].error = e.what();
    }
    rows[i].ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });
  const int depth = effective_depth(c);
  std::vector<std::string> header{"a", "verdict", "lambda_est", "recurrence_est", "nest_depth"};
  for (int n = 1; n <= depth; ++n) header.push_back("c_" + std::to_string(n));
  header.push_back("reason");
  if (c.timing) header.push_back("runtime_ms");
  report::Csv csv(header);
  std::map<VerdictKind, long> count;
  Json jrows = Json::array();
  for (const auto& r : rows) {
    ++count[r.v.kind];
    std::vector<std::string> cells{r.a.to_string(), to_string(r.v.kind),
                                   r.v.lambda_est ? report::dstr(*r.v.lambda_est) : "",
                                   r.v.recurrence_est ? report::dstr(*r.v.recurrence_est) : "",
                                   std::to_string(r.v.nest_depth)};
    for (int n = 0; n < depth; ++n) {
      cells.push_back(n < static_cast<int>(r.v.c.size()) ? report::dstr(r.v.c[n]) : "");
    }
    cells.push_back(r.error.empty() ? r.v.reason : r.v.reason + ": " + r.error);
    if (c.timing) cells.push_back(report::dstr(r.ms));
    csv.row(cells);
    Json jr = report::verdict(r.a, r.v);
    if (!r.error.empty()) jr["error"] = r.error;
    if (c.timing) jr["runtime_ms"] = r.ms;
    jrows.push_back(std::move(jr));
  }
  const double n = std::max<double>(1, static_cast<double>(rows.size()));
  Json summary{{"count", rows.size()},
               {"fraction_regular", rows.empty() ? 0.0 : count[VerdictKind::Regular] / n},
               {"fraction_ce_candidate", rows.empty() ? 0.0 : count[VerdictKind::ColletEckmannCandidate] / n},
               {"fraction_nonrecurrent_ce", rows.empty() ? 0.0 : count[VerdictKind::NonRecurrentCE] / n},
               {"fraction_undetermined", rows.empty() ? 0.0 : count[VerdictKind::Undetermined] / n}};
  if (c.format == "csv") {
    return {csv_preamble(c) + csv.str(), {{".summary.json", dump(envelope(c, summary))}}};
  }
  return {dump(envelope(c, Json{{"summary", summary}, {"rows", jrows}})), {}};
}

inline Output cmd_capacity(const RunConfig& c) {
  const mpfr_prec_t p = static_cast<mpfr_prec_t>(std::max<long>(c.precision_bits, kCapacityPrecision));
  const auto amb = parse_intervals(c.ambient, "ambient", p);
  if (amb.size() != 1) throw Error(ErrorKind::ConfigError, "config field 'ambient': exactly one lo:hi interval");
  IntervalSet X = [&] {
    try {
      return IntervalSet(amb[0], parse_intervals(c.set, "set", p));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigError) throw;
      throw Error(ErrorKind::ConfigError, std::string("config field 'set': ") + e.what());
    }
  }();
  double gamma = c.constants.gamma;
  if (gamma < 1) throw Error(ErrorKind::ConfigError, "config field 'constants.gamma': must be >= 1");
  const CapacityBound b = capacity_bounds(X, gamma, c.budgets.effort, p);
  if (c.format == "csv") {
    report::Csv csv({"gamma", "lower", "upper", "effort", "gap_count", "family_descriptor"});
    csv.row({report::dstr(b.gamma), b.lower.to_string(), b.upper.to_string(), std::to_string(b.effort),
             std::to_string(b.gap_count), b.family_descriptor});
    return {csv_preamble(c) + csv.str(), {}};
  }
  return {dump(envelope(c, report::capacity(b))), {}};
}

inline Output cmd_parawindow(const RunConfig& c) {
  const Real a = parse_param(c.a, "a", c.precision_bits);
  NestBudgets nb = nest_budgets(c);
  nb.depth = std::max(nb.depth, c.level);
  const NestReport rep = build_nest(invariant_interval(a), nb);
  Json r;
  r["nest_termination"] = to_string(rep.termination);
  r["nest_depth"] = rep.levels.size();
  try {
    std::vector<long> path = c.target;
    if (path.empty()) {
      if (static_cast<std::size_t>(c.level) > rep.levels.size() || !rep.levels[c.level - 1].tau ||
          *rep.levels[c.level - 1].tau == 0) {
        throw Error(ErrorKind::CombinatoricsUnstable, "no default target: branch of R_n(0) unknown at this level",
                    c.level);
      }
      path = {*rep.levels[c.level - 1].tau};
    }
    const ParaWindow lw = level_window(rep, c.level);
    const ParaWindow w = parameter_window(rep, c.level, path);
    r["level_window"] = report::window(lw);
    r["window"] = report::window(w);
  } catch (const Error& e) {
    r["error"] = Json{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
  }
  if (c.format == "csv") {
    report::Csv csv({"level", "target", "lo_inner", "hi_inner", "lo_outer", "hi_outer", "width", "error"});
    if (r.contains("window")) {
      const Json& w = r["window"];
      std::vector<long> t = w["target"].get<std::vector<long>>();
      csv.row({std::to_string(c.level), report::address(t), w["lo_inner"].get<std::string>(),
               w["hi_inner"].get<std::string>(), w["lo_outer"].get<std::string>(), w["hi_outer"].get<std::string>(),
               w["width"].get<std::string>(), ""});
    } else {
      csv.row({std::to_string(c.level), report::address(c.target), "", "", "", "", "",
               r["error"]["kind"].get<std::string>()});
    }
    return {csv_preamble(c) + csv.str(), {}};
  }
  return {dump(envelope(c, r)), {}};
}

inline Output cmd_stats(const RunConfig& c) {
  const Real a = parse_param(c.a, "a", c.precision_bits);
  const NestReport rep = build_nest(invariant_interval(a), nest_budgets(c));
  const ExponentConstants k = make_constants(c.constants);
  const auto& levels = rep.levels;
  std::vector<LevelData> lv;
  std::vector<LambdaReport> lam;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    lam.push_back(lambda_exponents(levels[i], 4, true, c.threads));
    LevelData L = level_data(levels, i);
    L.log_deriv = lam.back().profiles;
    lv.push_back(std::move(L));
  }
  const int n0 = 2;
  std::vector<VgBLevel> sets;
  if (levels.size() >= 2) sets = classify_returns_VG_B(lv, n0, k);
  TimeStatsOptions to;
  to.effort = c.budgets.effort;
  to.threads = c.threads;
  ChecklistOptions co;
  co.effort = c.budgets.effort;
  const auto ts = time_statistics_all(levels, k, to);

  Json jl = Json::array();
  report::Csv csv({"level", "index", "time", "parent_address", "lambda_j", "VG", "B", "LS", "LF", "LE", "LC", "G1", "G2"});
  const double lambda_n0 = levels.size() >= static_cast<std::size_t>(n0) ? lam[n0 - 1].lambda : NAN;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const ReturnSystem& rs = levels[i];
    Json j;
    j["level"] = rs.level;
    j["c"] = rs.c ? report::real(*rs.c) : Json(nullptr);
    j["v"] = report::opt(rs.v);
    j["s"] = report::opt(rs.s);
    j["tau"] = report::opt(rs.tau);
    j["branch_count"] = rs.branches.size();
    j["lambda"] = report::num(lam[i].lambda);
    j["lambda_argmin"] = lam[i].argmin;
    if (i < ts.size()) j["time_statistics"] = report::time_stats(ts[i]);
    const VgBLevel* vb = nullptr;
    for (const auto& s : sets) {
      if (s.n == rs.level) vb = &s;
    }
    std::map<long, GFlags> g;
    if (rs.level >= n0 && !std::isnan(lambda_n0)) g = check_G(lv[i], n0, lambda_n0, k);
    long cnt_ls = 0, cnt_lf = 0, cnt_le = 0, cnt_lc = 0, cnt_g1 = 0, cnt_g2 = 0, vg_not_g = 0;
    const VgBLevel* prev = nullptr;
    for (const auto& s : sets) {
      if (s.n == rs.level - 1) prev = &s;
    }
    for (const auto& b : rs.branches) {
      std::string ls, lf, le, lc;
      auto pa = lv[i].parent_address.find(b.index);
      if (vb && vb->landing.count(b.index)) {
        const LandingFlags& f = vb->landing.at(b.index);
        ls = f.ls ? "1" : "0";
        lf = f.lf ? "1" : "0";
        le = f.le ? (*f.le ? "1" : "0") : "";
        cnt_ls += f.ls;
        cnt_lf += f.lf;
        cnt_le += f.le && *f.le;
        if (prev && pa != lv[i].parent_address.end() && pa->second) {
          const LandingFlags full = classify_landing_LC(lv[i - 1], *pa->second, k, *prev);
          lc = *full.lc ? "1" : "0";
          cnt_lc += *full.lc;
        }
      }
      std::string g1, g2;
      if (g.count(b.index)) {
        g1 = g[b.index].g1 ? "1" : "0";
        g2 = g[b.index].g2 ? (*g[b.index].g2 ? "1" : "0") : "";
        cnt_g1 += g[b.index].g1;
        cnt_g2 += g[b.index].g2.value_or(false);
        if (vb && vb->is_vg(b.index) && !(g[b.index].g1 && g[b.index].g2.value_or(true))) ++vg_not_g;
      }
      csv.row({std::to_string(rs.level), std::to_string(b.index), std::to_string(b.return_time),
               pa != lv[i].parent_address.end() && pa->second ? report::address(*pa->second) : "",
               report::dstr(lam[i].lambda_j.at(b.index)), vb ? (vb->is_vg(b.index) ? "1" : "0") : "",
               vb ? (vb->is_bad(b.index) ? "1" : "0") : "", ls, lf, le, lc, g1, g2});
    }
    Json census{{"n0", n0}};
    if (vb) {
      census["VG"] = vb->base ? static_cast<long>(rs.branches.size()) : static_cast<long>(vb->vg.size());
      census["B"] = vb->bad.size();
      census["unresolved"] = vb->unresolved.size();
      census["LS"] = cnt_ls;
      census["LF"] = cnt_lf;
      census["LE"] = cnt_le;
      census["LC"] = cnt_lc;
    }
    if (!g.empty()) {
      census["G1"] = cnt_g1;
      census["G2"] = cnt_g2;
      census["VG_not_G"] = vg_not_g;
    }
    j["census"] = census;
    j["checklist"] = report::checklist(large_times_checklist(levels, i, k, co));
    jl.push_back(std::move(j));
  }
  Json r;
  r["nest"] = report::nest(rep, false);
  r["levels"] = jl;
  if (!sets.empty()) r["skeleton"] = report::skeleton(skeleton_checks(lv, sets, k));
  try {
    const auto rows = return_branch_recurrence(levels, k);
    long d_ok = 0, h_ok = 0;
    for (const auto& row : rows) {
      d_ok += row.distance_ok;
      h_ok += row.high_time_ok;
    }
    r["return_recurrence"] = Json{{"rows", rows.size()}, {"distance_ok", d_ok}, {"high_time_ok", h_ok}};
  } catch (const Error& e) {
    r["return_recurrence"] = Json{{"error", std::string(to_string(e.kind()))}};
  }
  if (c.format == "csv") return {csv_preamble(c) + csv.str(), {}};
  return {dump(envelope(c, r)), {}};
}

inline Output run(const RunConfig& c) {
  validate(c);
  if (c.command == "nest") return cmd_nest(c);
  if (c.command == "classify") return cmd_classify(c);
  if (c.command == "sweep") return cmd_sweep(c);
  if (c.command == "capacity") return cmd_capacity(c);
  if (c.command == "parawindow") return cmd_parawindow(c);
  return cmd_stats(c);
}

inline bool is_config_error(ErrorKind k) {
  return k == ErrorKind::ConfigError || k == ErrorKind::ParamOutOfRange || k == ErrorKind::GammaOutOfRange;
}

}  // namespace qnest::cli
