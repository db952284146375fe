#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tracersteer/cli/config.hpp"
#include "tracersteer/cli/io.hpp"

namespace tracersteer::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 1,
  exit_no_convergence = 2,
  exit_infeasible = 3,
  exit_file_format = 4,
  exit_check_failed = 5,
};

int exit_code_for(ErrorKind kind);

/// Solves the scenario and packages everything write_solution needs.
StoredSolution solve_scenario(const ScenarioConfig& config);

struct CheckItem {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool passed() const;
};

/// Re-validates a stored solution against its scenario: data consistency,
/// logged residuals, running constraints, costs, agreement with a fresh
/// integration from the stored initial costate, and the perturbation check.
CheckReport check_solution(const StoredSolution& stored, const ScenarioConfig& config,
                           const PerturbationOptions& perturbation = {});

/// Costs recomputed from the stored samples.
struct CostSummary {
  double j_ke = 0.0;
  double j_a = 0.0;
  double epsilon = 0.0;
  double total() const { return j_ke + epsilon * j_a; }
};
CostSummary recompute_costs(const StoredSolution& stored);

int run_solve(const ScenarioConfig& config, const std::filesystem::path& out_dir,
              std::ostream& out);
int run_simulate(const std::filesystem::path& dir, int particles, std::uint64_t seed,
                 std::ostream& out);
int run_check(const std::filesystem::path& dir, const ScenarioConfig& config, std::ostream& out);
int run_cost(const std::filesystem::path& dir, std::ostream& out);

}  // namespace tracersteer::cli
