#include <array>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bohmgrav/cli.hpp"
#include "bohmgrav/verify.hpp"
#include "bohmgrav/version.hpp"

namespace {

// Options shared by every data-producing subcommand.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "configuration file with key = value lines");
  cmd->add_option("--set", o.sets, "override one key, e.g. --set sigma=12.566");
  cmd->add_option("--out", o.out_dir, "parent directory for run outputs");
  cmd->add_option("--jobs", o.jobs, "worker budget to record for the run");
}

// Builds the run configuration from the optional file plus --set overrides.
// Overrides are appended as extra lines, so the regular parser applies and a
// bad override gets the same diagnostics as a bad file line.
bohmgrav::RunConfig load_config(const CommonOpts& o) {
  std::string text;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path, std::ios::binary);
    if (!in) throw bohmgrav::IoError("cannot read config file '" + o.config_path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  for (const auto& s : o.sets) {
    text += '\n';
    text += s;
  }
  bohmgrav::RunConfig cfg = bohmgrav::parse_config(text);
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  return cfg;
}

double parse_number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw bohmgrav::ConfigError(what + ": invalid number '" + s + "'");
  return v;
}

std::array<double, 2> parse_center(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos)
    throw bohmgrav::ConfigError("center must be 'x,y' (got '" + s + "')");
  return {parse_number(s.substr(0, comma), "center"),
          parse_number(s.substr(comma + 1), "center")};
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item =
        s.substr(start, (comma == std::string::npos ? s.size() : comma) - start);
    if (!item.empty()) values.push_back(parse_number(item, "--values"));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stationary solver for gravitationally self-coupled quantum densities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bohmgrav::version_string));

  CommonOpts solve_o, classical_o, nonuniq_o, sweep_o;

  CLI::App* solve = app.add_subcommand("solve", "solve the coupled system and export fields");
  add_common(solve, solve_o);

  CLI::App* classical =
      app.add_subcommand("classical", "solve the zero-dispersion classical problem");
  add_common(classical, classical_o);

  CLI::App* nonuniq =
      app.add_subcommand("nonuniq", "probe branch multiplicity with two bump seeds");
  add_common(nonuniq, nonuniq_o);
  std::string center1 = "0.3,0";
  std::string center2 = "-0.3,0";
  nonuniq->add_option("--center1", center1, "first bump center as x,y");
  nonuniq->add_option("--center2", center2, "second bump center as x,y");

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep and tabulate results");
  add_common(sweep, sweep_o);
  std::string kind = "epsilon";
  std::string values_arg;
  sweep->add_option("--kind", kind, "epsilon (descending) or sigma (ascending)")
      ->check(CLI::IsMember({"epsilon", "sigma"}));
  sweep->add_option("--values", values_arg, "comma-separated parameter values")->required();

  CLI::App* verify = app.add_subcommand("verify", "run the built-in acceptance checks");
  bool quick = false;
  verify->add_flag("--quick", quick, "skip the long radial criterion");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  return bohmgrav::guarded_command(
      [&]() -> int {
        if (solve->parsed()) return bohmgrav::cmd_solve(load_config(solve_o), std::cout);
        if (classical->parsed())
          return bohmgrav::cmd_classical(load_config(classical_o), std::cout);
        if (nonuniq->parsed())
          return bohmgrav::cmd_nonuniq(load_config(nonuniq_o), parse_center(center1),
                                       parse_center(center2), std::cout);
        if (sweep->parsed())
          return bohmgrav::cmd_sweep(
              load_config(sweep_o),
              kind == "epsilon" ? bohmgrav::SweepKind::epsilon : bohmgrav::SweepKind::sigma,
              parse_values(values_arg), std::cout);
        if (verify->parsed()) return bohmgrav::cmd_verify(quick, std::cout);
        return 3;
      },
      std::cerr);
}
