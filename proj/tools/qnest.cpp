#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qnest/cli.hpp"

namespace {

using qnest::cli::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& body) {
  if (path == "-") {
    std::cout << body;
    std::cout.flush();
    if (!std::cout) throw IoError("cannot write to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << body;
  out.close();
  if (!out) throw IoError("cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qnest: numerical lab for the real quadratic family a - x^2"};
  app.require_subcommand(1, 1);

  RunConfig flags;
  std::string config_path;
  double gamma = 0;
  std::string a_range;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config_path, "JSON run configuration");
    s->add_option("--precision,--precision-bits", flags.precision_bits, "working precision in bits");
    s->add_option("--profile", flags.constants.profile, "constants profile: practical|faithful");
    s->add_option("--const-a", flags.constants.a, "exponent a");
    s->add_option("--const-b", flags.constants.b, "exponent b");
    s->add_option("--const-a-tilde", flags.constants.a_tilde, "exponent a~");
    s->add_option("--const-b-tilde", flags.constants.b_tilde, "exponent b~");
    s->add_option("--gamma", gamma, "capacity exponent gamma");
    s->add_option("--gamma0", flags.constants.gamma0, "gamma_0");
    s->add_option("--seed", flags.seed, "random seed");
    s->add_option("--output,-o", flags.output, "output path, - for stdout");
    s->add_option("--format", flags.format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--threads", flags.threads, "worker threads");
    s->add_flag("--timing", flags.timing, "record wall-clock runtimes");
    s->add_option("--time-budget", flags.budgets.time_budget, "return-time budget");
    s->add_option("--count-budget", flags.budgets.count_budget, "branch-count budget");
    s->add_option("--depth", flags.budgets.depth, "nest depth");
    s->add_option("--N", flags.budgets.N, "orbit horizon for exponents");
    s->add_option("--window", flags.budgets.window, "tail window (0: N/4)");
    s->add_option("--effort", flags.budgets.effort, "capacity cover effort");
  };
  auto param = [&](CLI::App* s) { s->add_option("--a", flags.a, "parameter a in [-1/4, 2]"); };

  auto* nest = app.add_subcommand("nest", "build the nest of return systems");
  common(nest);
  param(nest);
  auto* classify = app.add_subcommand("classify", "classify one parameter");
  common(classify);
  param(classify);
  auto* sweep = app.add_subcommand("sweep", "classify a parameter grid");
  common(sweep);
  sweep->add_option("--a-range", a_range, "grid range lo:hi");
  sweep->add_option("--a-min", flags.a_min, "grid start");
  sweep->add_option("--a-max", flags.a_max, "grid end");
  sweep->add_option("--grid", flags.grid, "number of grid points");
  auto* capacity = app.add_subcommand("capacity", "bound the gamma-capacity of a finite union of intervals");
  common(capacity);
  capacity->add_option("--set", flags.set, "pieces lo:hi,lo:hi,...");
  capacity->add_option("--ambient", flags.ambient, "ambient interval lo:hi");
  auto* parawindow = app.add_subcommand("parawindow", "parameter window of a level and target");
  common(parawindow);
  param(parawindow);
  parawindow->add_option("--level", flags.level, "nest level");
  parawindow->add_option("--target", flags.target, "branch indices R_n(0) must pass");
  auto* stats = app.add_subcommand("stats", "branch statistics over the nest");
  common(stats);
  param(stats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  // options registered per subcommand share names; look them up on the chosen one
  CLI::App* sub = app.get_subcommands().front();
  auto set_on = [&](const std::string& name) {
    for (const auto* o : sub->get_options()) {
      for (const auto& ln : o->get_lnames()) {
        if (ln == name && o->count() > 0) return true;
      }
    }
    return false;
  };

  RunConfig cfg;
  try {
    cfg.precision_bits = qnest::cli::default_precision();
    cfg.command = sub->get_name();
    if (!config_path.empty()) {
      qnest::cli::apply_json(cfg, slurp(config_path));
      if (cfg.command != sub->get_name()) {
        throw qnest::Error(qnest::ErrorKind::ConfigError,
                           "config field 'command': " + cfg.command + " does not match subcommand " + sub->get_name());
      }
    }
    if (set_on("precision")) cfg.precision_bits = flags.precision_bits;
    if (set_on("profile")) cfg.constants.profile = flags.constants.profile;
    if (set_on("const-a")) cfg.constants.a = flags.constants.a;
    if (set_on("const-b")) cfg.constants.b = flags.constants.b;
    if (set_on("const-a-tilde")) cfg.constants.a_tilde = flags.constants.a_tilde;
    if (set_on("const-b-tilde")) cfg.constants.b_tilde = flags.constants.b_tilde;
    if (set_on("gamma")) cfg.constants.gamma = gamma;
    if (set_on("gamma0")) cfg.constants.gamma0 = flags.constants.gamma0;
    if (set_on("seed")) cfg.seed = flags.seed;
    if (set_on("output")) cfg.output = flags.output;
    if (set_on("format")) cfg.format = flags.format;
    if (set_on("threads")) cfg.threads = flags.threads;
    if (set_on("timing")) cfg.timing = flags.timing;
    if (set_on("time-budget")) cfg.budgets.time_budget = flags.budgets.time_budget;
    if (set_on("count-budget")) cfg.budgets.count_budget = flags.budgets.count_budget;
    if (set_on("depth")) cfg.budgets.depth = flags.budgets.depth;
    if (set_on("N")) cfg.budgets.N = flags.budgets.N;
    if (set_on("window")) cfg.budgets.window = flags.budgets.window;
    if (set_on("effort")) cfg.budgets.effort = flags.budgets.effort;
    if (set_on("a")) cfg.a = flags.a;
    if (set_on("a-range")) {
      const auto colon = a_range.find(':');
      if (colon == std::string::npos) {
        throw qnest::Error(qnest::ErrorKind::ConfigError, "flag --a-range: expected lo:hi, got " + a_range);
      }
      cfg.a_min = a_range.substr(0, colon);
      cfg.a_max = a_range.substr(colon + 1);
    }
    if (set_on("a-min")) cfg.a_min = flags.a_min;
    if (set_on("a-max")) cfg.a_max = flags.a_max;
    if (set_on("grid")) cfg.grid = flags.grid;
    if (set_on("set")) cfg.set = flags.set;
    if (set_on("ambient")) cfg.ambient = flags.ambient;
    if (set_on("level")) cfg.level = flags.level;
    if (set_on("target")) cfg.target = flags.target;

    const qnest::cli::Output out = qnest::cli::run(cfg);
    emit(cfg.output, out.body);
    for (const auto& [suffix, body] : out.extra) {
      if (cfg.output == "-") {
        std::cerr << body;
      } else {
        emit(cfg.output + suffix, body);
      }
    }
  } catch (const qnest::Error& e) {
    std::cerr << "qnest: " << e.what() << "\n";
    return qnest::cli::is_config_error(e.kind()) ? kExitConfig : 1;
  } catch (const IoError& e) {
    std::cerr << "qnest: io: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "qnest: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
