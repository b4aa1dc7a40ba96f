#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qnest/cli.hpp"

using namespace qnest;
using cli::RunConfig;

namespace {

std::string error_of(const std::function<void()>& f, ErrorKind* kind = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (kind) *kind = e.kind();
    return e.what();
  }
  return "";
}

// drop the comment preamble of a CSV artifact
std::string csv_rows(const std::string& body) {
  std::istringstream in(body);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    out += line + "\n";
  }
  return out;
}

int shell(const std::string& args, std::string* out = nullptr) {
  const std::string tmp = (std::filesystem::temp_directory_path() / "qnest_cli_test.out").string();
  const int rc = std::system((std::string(QNEST_BIN) + " " + args + " > " + tmp + " 2>&1").c_str());
  if (out) {
    std::ifstream f(tmp);
    std::stringstream ss;
    ss << f.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, EveryFieldHasADefault) {
  RunConfig c;
  c.command = "nest";
  const Json j = cli::to_json(c);
  for (const char* k : {"command", "a", "a_min", "a_max", "grid", "precision_bits", "budgets", "constants", "seed",
                        "output", "format"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j["budgets"]["depth"], 3);
  EXPECT_EQ(j["budgets"]["window"], 250);
  c.command = "sweep";
  EXPECT_EQ(cli::to_json(c)["budgets"]["depth"], 2);
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig c;
  c.command = "parawindow";
  c.a = "1.95";
  c.budgets.count_budget = 77;
  c.constants.profile = "faithful";
  c.target = {-9, 3};
  c.seed = 12345;
  RunConfig d;
  cli::apply_json(d, cli::to_json(c).dump());
  EXPECT_EQ(cli::to_json(c), cli::to_json(d));
}

TEST(Config, FieldDiagnostics) {
  RunConfig c;
  ErrorKind k{};
  std::string m = error_of([&] { cli::apply_json(c, R"({"budgets": {"depht": 3}})"); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
  EXPECT_NE(m.find("budgets.depht"), std::string::npos) << m;
  EXPECT_NE(m.find("unknown"), std::string::npos) << m;

  m = error_of([&] { cli::apply_json(c, R"({"grid": "ten"})"); }, &k);
  EXPECT_NE(m.find("'grid'"), std::string::npos) << m;
  EXPECT_NE(m.find("integer"), std::string::npos) << m;

  m = error_of([&] { cli::apply_json(c, R"({"constants": {"gamma": true}})"); });
  EXPECT_NE(m.find("constants.gamma"), std::string::npos) << m;

  m = error_of([&] { cli::apply_json(c, "{\n  \"a\": \"1.9\",\n  \"grid\": 3,,\n}"); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
  EXPECT_NE(m.find("line 3"), std::string::npos) << m;
}

TEST(Config, Validation) {
  ErrorKind k{};
  RunConfig c;
  c.command = "nest";
  c.a = "3";
  error_of([&] { cli::validate(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ParamOutOfRange);
  c.a = "-0.3";
  error_of([&] { cli::validate(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ParamOutOfRange);
  c.a = "banana";
  error_of([&] { cli::validate(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
  c.a = "-0.25";
  EXPECT_NO_THROW(cli::validate(c));
  c.precision_bits = 8;
  error_of([&] { cli::validate(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
  c = RunConfig{};
  c.command = "sweep";
  c.a_min = "1.9";
  c.a_max = "1.5";
  error_of([&] { cli::validate(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
  c = RunConfig{};
  c.constants.profile = "optimistic";
  error_of([&] { cli::validate(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
}

TEST(Cli, NestAtTwoStartsOnUnitInterval) {
  RunConfig c;
  c.command = "nest";
  c.a = "2";
  c.budgets.depth = 2;
  const Json j = Json::parse(cli::run(c).body);
  EXPECT_EQ(j["tool"], "qnest");
  EXPECT_EQ(j["config"], cli::to_json(c));
  EXPECT_EQ(j["result"]["levels"][0]["interval"]["lo"], "-1");
  EXPECT_EQ(j["result"]["levels"][0]["interval"]["hi"], "1");
}

TEST(Cli, NestRerunIsByteIdentical) {
  RunConfig c;
  c.command = "nest";
  c.a = "1.9";
  c.budgets.depth = 3;
  c.precision_bits = 512;
  const std::string first = cli::run(c).body;
  EXPECT_EQ(first, cli::run(c).body);
  c.format = "csv";
  EXPECT_EQ(cli::run(c).body, cli::run(c).body);
}

TEST(Cli, SweepVerdictsOnSmallGrid) {
  RunConfig c;
  c.command = "sweep";
  c.a_min = "0";
  c.a_max = "2";
  c.grid = 3;
  const Json j = Json::parse(cli::run(c).body);
  const Json& rows = j["result"]["rows"];
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]["verdict"], "Regular");
  EXPECT_EQ(rows[1]["verdict"], "Regular");
  EXPECT_EQ(rows[2]["verdict"], "NonRecurrentCE");
  EXPECT_NEAR(j["result"]["summary"]["fraction_regular"].get<double>(), 2.0 / 3, 1e-15);
}

TEST(Cli, EmptyGridGivesHeaderOnly) {
  RunConfig c;
  c.command = "sweep";
  c.grid = 0;
  c.format = "csv";
  const cli::Output o = cli::run(c);
  EXPECT_EQ(csv_rows(o.body), "a,verdict,lambda_est,recurrence_est,nest_depth,c_1,c_2,reason\n");
  ASSERT_EQ(o.extra.size(), 1u);
  EXPECT_EQ(Json::parse(o.extra[0].second)["result"]["count"], 0);
}

TEST(Cli, SweepIndependentOfThreadCount) {
  RunConfig c;
  c.command = "sweep";
  c.a_min = "1.7";
  c.a_max = "2";
  c.grid = 9;
  c.format = "csv";
  c.threads = 1;
  const cli::Output serial = cli::run(c);
  c.threads = 4;
  const cli::Output par = cli::run(c);
  EXPECT_EQ(serial.body, par.body);
  EXPECT_EQ(serial.extra, par.extra);
  // ascending grid
  std::istringstream in(csv_rows(serial.body));
  std::string line;
  std::getline(in, line);
  double prev = -1;
  int n = 0;
  while (std::getline(in, line)) {
    const double a = std::stod(line.substr(0, line.find(',')));
    EXPECT_GT(a, prev);
    prev = a;
    ++n;
  }
  EXPECT_EQ(n, 9);
}

TEST(Cli, TimingColumnOnlyOnRequest) {
  RunConfig c;
  c.command = "sweep";
  c.a_min = "1";
  c.a_max = "1";
  c.grid = 1;
  c.format = "csv";
  EXPECT_EQ(csv_rows(cli::run(c).body).find("runtime_ms"), std::string::npos);
  c.timing = true;
  EXPECT_NE(csv_rows(cli::run(c).body).find("runtime_ms"), std::string::npos);
}

TEST(Cli, CapacityOfInterval) {
  RunConfig c;
  c.command = "capacity";
  c.set = "0:1";
  c.ambient = "0:1";
  const Json j = Json::parse(cli::run(c).body)["result"];
  // the whole ambient interval has capacity one
  EXPECT_EQ(Real::parse(j["lower"].get<std::string>()), Real(1L, kDefaultPrecisionBits));
  EXPECT_EQ(Real::parse(j["upper"].get<std::string>()), Real(1L, kDefaultPrecisionBits));
  c.set = "0:2";
  ErrorKind k{};
  error_of([&] { cli::run(c); }, &k);
  EXPECT_EQ(k, ErrorKind::ConfigError);
}

TEST(Cli, ParawindowSiblingsDisjoint) {
  RunConfig c;
  c.command = "parawindow";
  c.a = "1.9";
  c.level = 1;
  c.budgets.depth = 2;
  auto window = [&](long t) {
    c.target = {t};
    const Json j = Json::parse(cli::run(c).body)["result"];
    EXPECT_FALSE(j.contains("error")) << j.dump();
    return std::pair{Real::parse(j["window"]["lo_inner"].get<std::string>()),
                     Real::parse(j["window"]["hi_inner"].get<std::string>())};
  };
  const auto [lo1, hi1] = window(1);
  const auto [lo2, hi2] = window(-1);
  EXPECT_TRUE(hi1 < lo2 || hi2 < lo1);
}

TEST(Cli, StatsOnEmptyNestIsNotEvaluable) {
  RunConfig c;
  c.command = "stats";
  c.a = "0";
  const Json j = Json::parse(cli::run(c).body)["result"];
  EXPECT_EQ(j["levels"].size(), 0u);
  EXPECT_EQ(j["nest"]["termination"], "RegularDetected");
  const auto items = large_times_checklist({}, 0, ExponentConstants::practical());
  ASSERT_EQ(items.size(), 9u);
  for (const auto& it : items) EXPECT_EQ(it.status, ItemStatus::NotEvaluable) << it.name;
}

TEST(Cli, StatsReportsPerLevelFields) {
  RunConfig c;
  c.command = "stats";
  c.a = "1.9";
  c.budgets.depth = 2;
  const Json j = Json::parse(cli::run(c).body)["result"];
  ASSERT_EQ(j["levels"].size(), 2u);
  const Json& l2 = j["levels"][1];
  EXPECT_EQ(l2["v"], 15);
  EXPECT_EQ(l2["tau"], -9);
  EXPECT_EQ(l2["census"]["VG"], l2["branch_count"]);
  EXPECT_EQ(l2["checklist"].size(), 9u);
}

TEST(Binary, ExitCodes) {
  std::string out;
  EXPECT_EQ(shell("nest --a 3", &out), 2) << out;
  EXPECT_NE(out.find("ParamOutOfRange"), std::string::npos) << out;
  EXPECT_EQ(shell("nest --a 1.9 --format xml", &out), 2) << out;
  EXPECT_EQ(shell("nest --a 1.9 --bogus 1", &out), 2) << out;
  EXPECT_EQ(shell("nest --a 1.9 --depth 1 -o /nonexistent-dir/x.json", &out), 3) << out;
  EXPECT_EQ(shell("nest --config /nonexistent-dir/c.json", &out), 3) << out;
  EXPECT_EQ(shell("sweep --grid 0 --format csv", &out), 0) << out;
  EXPECT_EQ(shell("nest --a 1.9 --depth 1", &out), 0) << out;
}

TEST(Binary, ConfigFileAndFlagPrecedence) {
  const auto path = std::filesystem::temp_directory_path() / "qnest_cli_cfg.json";
  {
    std::ofstream f(path);
    f << R"({"command": "nest", "a": "1.9", "budgets": {"depth": 1}, "precision_bits": 128})";
  }
  std::string out;
  ASSERT_EQ(shell("nest --config " + path.string() + " --precision 160", &out), 0) << out;
  const Json j = Json::parse(out);
  EXPECT_EQ(j["config"]["precision_bits"], 160);
  EXPECT_EQ(j["config"]["budgets"]["depth"], 1);
  {
    std::ofstream f(path);
    f << "{\"command\": \"nest\",\n \"budgets\": {\"deep\": 1}}";
  }
  EXPECT_EQ(shell("nest --config " + path.string(), &out), 2);
  EXPECT_NE(out.find("budgets.deep"), std::string::npos) << out;
  std::filesystem::remove(path);
}

TEST(Binary, PrecisionFromEnvironment) {
  std::string out;
  ASSERT_EQ(shell("nest --a 1.9 --depth 1 QNEST_DUMMY=1", &out), 2);  // stray positional
  ASSERT_EQ(std::system(("QNEST_PRECISION=200 " + std::string(QNEST_BIN) +
                         " nest --a 1.9 --depth 1 > /tmp/qnest_env.json 2>&1")
                            .c_str()),
            0);
  std::ifstream f("/tmp/qnest_env.json");
  const Json j = Json::parse(f);
  EXPECT_EQ(j["config"]["precision_bits"], 200);
  EXPECT_NE(std::system(("QNEST_PRECISION=lots " + std::string(QNEST_BIN) + " nest --a 1.9 >/dev/null 2>&1").c_str()),
            0);
}

TEST(Cli, ThousandPointSweepFindsHyperbolicWindows) {
  RunConfig c;
  c.command = "sweep";
  c.a_min = "1.5";
  c.a_max = "2";
  c.grid = 1000;
  c.threads = default_threads();
  c.format = "csv";
  const cli::Output o = cli::run(c);
  const Json s = Json::parse(o.extra.at(0).second)["result"];
  EXPECT_EQ(s["count"], 1000);
  EXPECT_GT(s["fraction_regular"].get<double>(), 0.0);
  const double total = s["fraction_regular"].get<double>() + s["fraction_ce_candidate"].get<double>() +
                       s["fraction_nonrecurrent_ce"].get<double>() + s["fraction_undetermined"].get<double>();
  EXPECT_NEAR(total, 1.0, 1e-12);
}
