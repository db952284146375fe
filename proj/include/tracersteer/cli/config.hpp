#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tracersteer/cli/generators.hpp"
#include "tracersteer/shoot.hpp"

namespace tracersteer::cli {

enum class CovarianceSource { mccann, samples, endpoints };
enum class TracerSource { endpoints, generator, samples };

/// Validated scenario. Relative file names are resolved against base_dir.
struct ScenarioConfig {
  int problem = 1;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Matrix sigma0;
  Matrix sigma1;

  CovarianceSource covariance = CovarianceSource::mccann;
  std::filesystem::path covariance_file;

  TracerSource tracer_source = TracerSource::endpoints;
  Matrix y0;
  Matrix y1;
  std::string generator;
  SpiralParams spiral;
  std::filesystem::path tracer_file;

  double epsilon = 1.0;
  std::optional<Matrix> n0;
  int steps = 2000;
  ShootingOptions shooting;

  std::filesystem::path output_directory;
  std::vector<double> checkpoints{0.0, 0.25, 0.5, 0.75, 1.0};
  std::filesystem::path base_dir;
};

/// Parses a JSON scenario. Throws SchemaError (field-level message) or
/// RegimeMismatch when the data regime does not fit the problem.
ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

ScenarioConfig load_config(const std::filesystem::path& file);

CovariancePath build_covariance_path(const ScenarioConfig& config);
TracerPath build_tracer_path(const ScenarioConfig& config);
Problem build_problem(const ScenarioConfig& config);

}  // namespace tracersteer::cli
