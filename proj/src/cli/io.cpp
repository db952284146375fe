#include "tracersteer/cli/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tracersteer/boundary.hpp"

namespace tracersteer::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error format_error(const fs::path& file, const std::string& what) {
  return Error(ErrorKind::file_format, file.string() + ": " + what);
}

double parse_field(const std::string& text, const fs::path& file, std::size_t line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw format_error(file, "line " + std::to_string(line) + ": '" + text + "' is not a number");
  }
  return value;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

json matrix_to_json(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& value, const fs::path& file, const std::string& field) {
  if (!value.is_array()) throw format_error(file, "field '" + field + "' is not a matrix");
  const auto rows = static_cast<Eigen::Index>(value.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(value[0].size());
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = value[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw format_error(file, "field '" + field + "' has ragged rows");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const json& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number()) throw format_error(file, "field '" + field + "' has a non-number");
      out(i, j) = v.get<double>();
    }
  }
  return out;
}

Matrix row_major(const std::vector<double>& row, std::size_t offset, Eigen::Index rows,
                 Eigen::Index cols) {
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = row[offset + i * cols + j];
  }
  return out;
}

void append_row_major(std::vector<double>& row, const Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
  }
}

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw format_error(file, "cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw format_error(file, e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

void require_columns(const CsvTable& table, std::size_t expected, const fs::path& file) {
  if (table.header.size() != expected) {
    throw format_error(file, "expected " + std::to_string(expected) + " columns, found " +
                                 std::to_string(table.header.size()));
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(const fs::path& file, const CsvTable& table) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    out << (j ? "," : "") << table.header[j];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

CsvTable read_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw format_error(file, "cannot open");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw format_error(file, "line " + std::to_string(line_no) + " has " +
                                   std::to_string(fields.size()) + " fields, header has " +
                                   std::to_string(table.header.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_field(f, file, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw format_error(file, "empty file");
  return table;
}

std::vector<std::string> matrix_columns(const std::string& prefix, Eigen::Index rows,
                                        Eigen::Index cols) {
  const std::string sep = rows > 9 || cols > 9 ? "_" : "";
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= rows; ++i) {
    for (Eigen::Index j = 1; j <= cols; ++j) {
      out.push_back(prefix + "_" + std::to_string(i) + sep + std::to_string(j));
    }
  }
  return out;
}

std::vector<CovarianceNode> read_covariance_nodes(const fs::path& file, Eigen::Index n) {
  const CsvTable table = read_csv(file);
  require_columns(table, static_cast<std::size_t>(1 + n * n), file);
  std::vector<CovarianceNode> nodes;
  for (const auto& row : table.rows) {
    try {
      nodes.push_back({row[0], SpdMatrix(row_major(row, 1, n, n))});
    } catch (const Error& e) {
      throw format_error(file, "sample at t = " + format_double(row[0]) + ": " + e.what());
    }
  }
  return nodes;
}

std::vector<TracerNode> read_tracer_nodes(const fs::path& file, Eigen::Index n, Eigen::Index m) {
  const CsvTable table = read_csv(file);
  require_columns(table, static_cast<std::size_t>(1 + n * m), file);
  std::vector<TracerNode> nodes;
  for (const auto& row : table.rows) nodes.push_back({row[0], row_major(row, 1, n, m)});
  return nodes;
}

void write_tracer_nodes(const fs::path& file, const std::vector<TracerNode>& nodes) {
  CsvTable table;
  const Eigen::Index n = nodes.empty() ? 0 : nodes.front().y.rows();
  const Eigen::Index m = nodes.empty() ? 0 : nodes.front().y.cols();
  table.header = {"t"};
  for (auto& c : matrix_columns("Y", n, m)) table.header.push_back(std::move(c));
  for (const auto& node : nodes) {
    std::vector<double> row{node.t};
    append_row_major(row, node.y);
    table.rows.push_back(std::move(row));
  }
  write_csv(file, table);
}

void write_solution(const fs::path& dir, const StoredSolution& stored) {
  fs::create_directories(dir);
  const FlowSolution& flow = stored.flow;
  const Eigen::Index n = stored.sigma0.rows();

  CsvTable table;
  table.header = {"t"};
  for (auto& c : matrix_columns("Phi", n, n)) table.header.push_back(std::move(c));
  for (auto& c : matrix_columns("K", n, n)) table.header.push_back(std::move(c));
  table.header.push_back("residual_cov");
  table.header.push_back("residual_tracer");
  for (std::size_t i = 0; i < flow.times.size(); ++i) {
    std::vector<double> row{flow.times[i]};
    append_row_major(row, flow.phi[i]);
    append_row_major(row, flow.gain[i]);
    row.push_back(flow.residual_cov[i]);
    row.push_back(flow.residual_tracer[i]);
    table.rows.push_back(std::move(row));
  }
  write_csv(dir / "solution.csv", table);

  CsvTable iterations;
  iterations.header = {"candidate", "start", "iteration", "residual_norm", "damping", "rank"};
  for (const auto& rec : flow.log) {
    iterations.rows.push_back({double(rec.candidate), double(rec.start), double(rec.iteration),
                               rec.residual_norm, rec.damping, double(rec.rank)});
  }
  write_csv(dir / "iterations.csv", iterations);

  if (stored.problem == 3) write_tracer_nodes(dir / "tracers.csv", stored.tracer_nodes);

  json summary;
  summary["problem"] = stored.problem;
  summary["converged"] = flow.converged;
  summary["iterations"] = flow.iterations;
  summary["residual_norm"] = flow.residual_norm;
  summary["residual_tol"] = stored.residual_tol;
  summary["steps"] = flow.steps();
  summary["epsilon"] = flow.epsilon;
  summary["j_ke"] = flow.j_ke;
  summary["j_a"] = flow.j_a;
  summary["total_cost"] = flow.total_cost();
  summary["candidate"] = flow.candidate;
  summary["phi1"] = matrix_to_json(flow.phi.back());
  summary["phi1_target"] =
      flow.phi1_target.size() == 0 ? json(nullptr) : matrix_to_json(flow.phi1_target);
  if (n == 2) {
    const Matrix u = SpdMatrix(stored.sigma1).inverse_sqrt() * flow.phi.back() *
                     SpdMatrix(stored.sigma0).sqrt();
    summary["rotation_deg"] = clockwise_rotation_deg(u);
  }
  summary["p0"] = matrix_to_json(flow.p0);
  summary["sigma0"] = matrix_to_json(stored.sigma0);
  summary["sigma1"] = matrix_to_json(stored.sigma1);
  summary["y0"] = matrix_to_json(stored.y0);
  summary["y1"] = matrix_to_json(stored.y1);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
}

StoredSolution read_solution(const fs::path& dir) {
  const fs::path summary_file = dir / "summary.json";
  const json summary = read_json(summary_file);
  StoredSolution stored;
  FlowSolution& flow = stored.flow;
  Eigen::Index n = 0;
  try {
    stored.problem = summary.at("problem").get<int>();
    flow.kind = stored.problem == 1 ? ProblemKind::covariance_path : ProblemKind::tracer_trajectory;
    flow.converged = summary.at("converged").get<bool>();
    flow.iterations = summary.at("iterations").get<int>();
    flow.residual_norm = summary.at("residual_norm").get<double>();
    stored.residual_tol = summary.at("residual_tol").get<double>();
    flow.epsilon = summary.at("epsilon").get<double>();
    flow.j_ke = summary.at("j_ke").get<double>();
    flow.j_a = summary.at("j_a").get<double>();
    flow.candidate = summary.at("candidate").get<int>();
    flow.p0 = matrix_from_json(summary.at("p0"), summary_file, "p0");
    if (!summary.at("phi1_target").is_null()) {
      flow.phi1_target = matrix_from_json(summary.at("phi1_target"), summary_file, "phi1_target");
    }
    stored.sigma0 = matrix_from_json(summary.at("sigma0"), summary_file, "sigma0");
    stored.sigma1 = matrix_from_json(summary.at("sigma1"), summary_file, "sigma1");
    stored.y0 = matrix_from_json(summary.at("y0"), summary_file, "y0");
    stored.y1 = matrix_from_json(summary.at("y1"), summary_file, "y1");
    n = stored.sigma0.rows();
  } catch (const json::exception& e) {
    throw format_error(summary_file, e.what());
  }
  if (stored.problem != 1 && stored.problem != 3) {
    throw format_error(summary_file, "problem must be 1 or 3");
  }

  const fs::path solution_file = dir / "solution.csv";
  const CsvTable table = read_csv(solution_file);
  require_columns(table, static_cast<std::size_t>(1 + 2 * n * n + 2), solution_file);
  for (const auto& row : table.rows) {
    flow.times.push_back(row[0]);
    flow.phi.push_back(row_major(row, 1, n, n));
    flow.gain.push_back(row_major(row, 1 + n * n, n, n));
    flow.residual_cov.push_back(row[1 + 2 * n * n]);
    flow.residual_tracer.push_back(row[2 + 2 * n * n]);
  }
  if (flow.times.size() < 17) throw format_error(solution_file, "needs at least 17 grid nodes");
  const double h = 1.0 / static_cast<double>(flow.times.size() - 1);
  for (std::size_t i = 0; i < flow.times.size(); ++i) {
    if (std::abs(flow.times[i] - h * static_cast<double>(i)) > 1e-12) {
      throw format_error(solution_file, "time column is not a uniform grid of [0, 1]");
    }
  }

  const fs::path iterations_file = dir / "iterations.csv";
  if (fs::exists(iterations_file)) {
    const CsvTable log = read_csv(iterations_file);
    require_columns(log, 6, iterations_file);
    for (const auto& r : log.rows) {
      flow.log.push_back({int(r[0]), int(r[1]), int(r[2]), r[3], r[4], int(r[5])});
    }
  }
  if (stored.problem == 3) {
    stored.tracer_nodes = read_tracer_nodes(dir / "tracers.csv", n, stored.y0.cols());
  }
  return stored;
}

void write_ensemble(const fs::path& dir, const EnsembleReport& report) {
  fs::create_directories(dir);
  CsvTable table;
  const Eigen::Index n = report.checkpoints.empty() ? 0 : report.checkpoints.front().target.rows();
  table.header = {"checkpoint"};
  for (auto& c : matrix_columns("empirical", n, n)) table.header.push_back(std::move(c));
  for (auto& c : matrix_columns("target", n, n)) table.header.push_back(std::move(c));
  table.header.push_back("relative_error");
  for (const auto& c : report.checkpoints) {
    std::vector<double> row{c.t};
    append_row_major(row, c.empirical);
    append_row_major(row, c.target);
    row.push_back(c.relative_error);
    table.rows.push_back(std::move(row));
  }
  write_csv(dir / "ensemble.csv", table);

  json out;
  out["particles"] = report.particles;
  out["seed"] = report.seed;
  out["max_relative_error"] = report.max_relative_error();
  out["tracer_endpoint_error"] = report.tracer_endpoint_error;
  out["tracer_path_error"] =
      std::isnan(report.tracer_path_error) ? json(nullptr) : json(report.tracer_path_error);
  out["wall_seconds"] = report.wall_seconds;
  json checkpoints = json::array();
  for (const auto& c : report.checkpoints) {
    checkpoints.push_back({{"t", c.t}, {"relative_error", c.relative_error}});
  }
  out["checkpoints"] = std::move(checkpoints);
  write_text(dir / "ensemble.json", out.dump(2) + "\n");
}

}  // namespace tracersteer::cli
