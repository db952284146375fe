#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tracersteer/ensemble.hpp"

namespace tracersteer::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// 17 significant digits, so parsing the text gives back the same double.
std::string format_double(double value);

void write_csv(const std::filesystem::path& file, const CsvTable& table);
/// Throws FileFormat on unreadable files, ragged rows or non-numeric fields.
CsvTable read_csv(const std::filesystem::path& file);

/// Column names prefix_11 ... prefix_rc in row-major order.
std::vector<std::string> matrix_columns(const std::string& prefix, Eigen::Index rows,
                                        Eigen::Index cols);

/// Sample-node files: column t, then the row-major matrix entries.
std::vector<CovarianceNode> read_covariance_nodes(const std::filesystem::path& file,
                                                  Eigen::Index n);
std::vector<TracerNode> read_tracer_nodes(const std::filesystem::path& file, Eigen::Index n,
                                          Eigen::Index m);
void write_tracer_nodes(const std::filesystem::path& file, const std::vector<TracerNode>& nodes);

/// Everything run_solve leaves on disk, read back.
struct StoredSolution {
  FlowSolution flow;
  int problem = 1;
  Matrix sigma0;
  Matrix sigma1;
  Matrix y0;
  Matrix y1;
  /// Tracer samples on the solution grid (tracer-trajectory problems only).
  std::vector<TracerNode> tracer_nodes;
  double residual_tol = 0.0;
};

/// Writes solution.csv, summary.json, iterations.csv and, for
/// tracer-trajectory problems, tracers.csv.
void write_solution(const std::filesystem::path& dir, const StoredSolution& stored);
StoredSolution read_solution(const std::filesystem::path& dir);

void write_ensemble(const std::filesystem::path& dir, const EnsembleReport& report);

}  // namespace tracersteer::cli
