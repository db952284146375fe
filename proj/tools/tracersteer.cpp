#include <iostream>

#include "CLI11.hpp"
#include "tracersteer/cli/commands.hpp"
#include "tracersteer/log.hpp"

namespace ts = tracersteer;
namespace cli = tracersteer::cli;

int main(int argc, char** argv) {
  CLI::App app{"tracersteer: recover gain schedules of linear Gaussian ensemble flows"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto* solve = app.add_subcommand("solve", "solve a scenario and write the solution files");
  solve->add_option("--config", config_path, "scenario configuration (JSON)")->required();
  solve->add_option("--out", out_dir, "output directory (defaults to output.directory)");

  std::string solution_dir;
  int particles = 100000;
  std::uint64_t seed = 7;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble check of a solution");
  simulate->add_option("--solution", solution_dir, "solution directory")->required();
  simulate->add_option("--particles", particles, "number of particles")->check(CLI::Range(100, 100000000));
  simulate->add_option("--seed", seed, "random seed");

  auto* check = app.add_subcommand("check", "re-validate a solution against its scenario");
  check->add_option("--solution", solution_dir, "solution directory")->required();
  check->add_option("--config", config_path, "scenario configuration (JSON)")->required();

  auto* cost = app.add_subcommand("cost", "recompute the costs of a stored solution");
  cost->add_option("--solution", solution_dir, "solution directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::exit_ok : cli::exit_usage;
  }

  try {
    if (*solve) {
      const ts::cli::ScenarioConfig config = cli::load_config(config_path);
      const std::filesystem::path dir =
          out_dir.empty() ? config.output_directory : std::filesystem::path(out_dir);
      if (dir.empty()) {
        ts::log(ts::LogLevel::error, "no output directory: pass --out or set output.directory");
        return cli::exit_usage;
      }
      return cli::run_solve(config, dir, std::cout);
    }
    if (*simulate) return cli::run_simulate(solution_dir, particles, seed, std::cout);
    if (*check) return cli::run_check(solution_dir, cli::load_config(config_path), std::cout);
    if (*cost) return cli::run_cost(solution_dir, std::cout);
  } catch (const ts::Error& e) {
    ts::log(ts::LogLevel::error, e.what());
    return cli::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    ts::log(ts::LogLevel::error, e.what());
    return cli::exit_usage;
  }
  return cli::exit_usage;
}
