#include "tracersteer/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tracersteer/cli/io.hpp"

namespace tracersteer::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error schema_error(const std::string& field, const std::string& what) {
  return Error(ErrorKind::schema_error, "field '" + field + "': " + what);
}

Error regime_error(const std::string& what) { return Error(ErrorKind::regime_mismatch, what); }

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

void check_object(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw schema_error(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw schema_error(join(path, key), "unknown field");
  }
}

const json& require(const json& obj, const std::string& path, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw schema_error(join(path, key), "missing");
  return *it;
}

double get_number(const json& value, const std::string& field) {
  if (!value.is_number()) throw schema_error(field, "expected a number");
  return value.get<double>();
}

long long get_integer(const json& value, const std::string& field) {
  if (!value.is_number_integer()) throw schema_error(field, "expected an integer");
  return value.get<long long>();
}

std::string get_string(const json& value, const std::string& field) {
  if (!value.is_string()) throw schema_error(field, "expected a string");
  return value.get<std::string>();
}

Matrix get_matrix(const json& value, const std::string& field, Eigen::Index rows,
                  Eigen::Index cols) {
  const std::string shape = std::to_string(rows) + " x " + std::to_string(cols);
  if (!value.is_array() || static_cast<Eigen::Index>(value.size()) != rows) {
    throw schema_error(field, "expected a " + shape + " matrix as an array of rows");
  }
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = value[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw schema_error(field, "expected a " + shape + " matrix as an array of rows");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = get_number(row[static_cast<std::size_t>(j)], field);
    }
  }
  return out;
}

Matrix get_spd(const json& value, const std::string& field, Eigen::Index n) {
  Matrix a = get_matrix(value, field, n, n);
  try {
    return SpdMatrix(a).matrix();
  } catch (const Error& e) {
    throw schema_error(field, e.what());
  }
}

double positive(double v, const std::string& field) {
  if (!(v > 0.0)) throw schema_error(field, "must be positive");
  return v;
}

void parse_covariance(const json& doc, ScenarioConfig& config) {
  const auto it = doc.find("covariance_path");
  if (config.problem == 3) {
    config.covariance = CovarianceSource::endpoints;
    if (it == doc.end()) return;
    check_object(*it, "covariance_path", {"kind"});
    if (get_string(require(*it, "covariance_path", "kind"), "covariance_path.kind") != "endpoints") {
      throw regime_error("problem 3 takes covariance endpoints only; covariance_path.kind must be "
                         "'endpoints'");
    }
    return;
  }
  if (it == doc.end()) throw schema_error("covariance_path", "missing");
  check_object(*it, "covariance_path", {"kind", "file"});
  const std::string kind =
      get_string(require(*it, "covariance_path", "kind"), "covariance_path.kind");
  if (kind == "mccann") {
    config.covariance = CovarianceSource::mccann;
  } else if (kind == "samples") {
    config.covariance = CovarianceSource::samples;
    config.covariance_file =
        config.base_dir / get_string(require(*it, "covariance_path", "file"), "covariance_path.file");
  } else if (kind == "endpoints") {
    throw regime_error("problem 1 needs the full covariance path (mccann or samples)");
  } else {
    throw schema_error("covariance_path.kind", "expected mccann, samples or endpoints");
  }
}

void parse_tracers(const json& doc, ScenarioConfig& config) {
  const json& tracers = require(doc, "", "tracers");
  check_object(tracers, "tracers", {"kind", "y0", "y1", "generator", "file"});
  const std::string kind = get_string(require(tracers, "tracers", "kind"), "tracers.kind");
  if (kind == "endpoints") {
    if (config.problem == 3) {
      throw regime_error("problem 3 needs a full tracer trajectory, not endpoints");
    }
    config.tracer_source = TracerSource::endpoints;
    config.y0 = get_matrix(require(tracers, "tracers", "y0"), "tracers.y0", config.n, config.m);
    config.y1 = get_matrix(require(tracers, "tracers", "y1"), "tracers.y1", config.n, config.m);
    return;
  }
  if (kind != "trajectory") throw schema_error("tracers.kind", "expected endpoints or trajectory");
  if (config.problem == 1) {
    throw regime_error("problem 1 takes tracer endpoints; a trajectory belongs to problem 3");
  }
  const bool has_generator = tracers.contains("generator");
  const bool has_file = tracers.contains("file");
  if (has_generator == has_file) {
    throw schema_error("tracers", "a trajectory needs exactly one of 'generator' or 'file'");
  }
  if (has_file) {
    config.tracer_source = TracerSource::samples;
    config.tracer_file = config.base_dir / get_string(tracers["file"], "tracers.file");
    return;
  }
  const json& gen = tracers["generator"];
  check_object(gen, "tracers.generator", {"name", "y0", "rho", "theta1_deg"});
  config.tracer_source = TracerSource::generator;
  config.generator = get_string(require(gen, "tracers.generator", "name"), "tracers.generator.name");
  if (config.generator != "spiral") {
    throw Error(ErrorKind::unknown_generator,
                "unknown tracer generator '" + config.generator + "' (available: spiral)");
  }
  config.spiral.y0 = get_matrix(require(gen, "tracers.generator", "y0"), "tracers.generator.y0",
                                config.n, config.m);
  config.spiral.rho = positive(
      get_number(require(gen, "tracers.generator", "rho"), "tracers.generator.rho"),
      "tracers.generator.rho");
  config.spiral.theta1_deg = get_number(require(gen, "tracers.generator", "theta1_deg"),
                                        "tracers.generator.theta1_deg");
}

void parse_sections(const json& doc, ScenarioConfig& config) {
  if (const auto it = doc.find("integrator"); it != doc.end()) {
    check_object(*it, "integrator", {"steps"});
    if (it->contains("steps")) {
      const long long steps = get_integer((*it)["steps"], "integrator.steps");
      if (steps < 16) throw schema_error("integrator.steps", "must be at least 16");
      config.steps = static_cast<int>(steps);
    }
  }
  if (const auto it = doc.find("shooting"); it != doc.end()) {
    check_object(*it, "shooting",
                 {"tol", "max_iter", "multistart", "seed", "fd_step", "damping", "seed_scale"});
    ShootingOptions& s = config.shooting;
    const json& sh = *it;
    if (sh.contains("tol")) s.residual_tol = positive(get_number(sh["tol"], "shooting.tol"), "shooting.tol");
    if (sh.contains("max_iter")) {
      s.max_iterations = static_cast<int>(get_integer(sh["max_iter"], "shooting.max_iter"));
      if (s.max_iterations < 1) throw schema_error("shooting.max_iter", "must be positive");
    }
    if (sh.contains("multistart")) {
      s.multistart = static_cast<int>(get_integer(sh["multistart"], "shooting.multistart"));
      if (s.multistart < 1) throw schema_error("shooting.multistart", "must be positive");
    }
    if (sh.contains("seed")) {
      const long long seed = get_integer(sh["seed"], "shooting.seed");
      if (seed < 0) throw schema_error("shooting.seed", "must be non-negative");
      s.seed = static_cast<std::uint64_t>(seed);
    }
    if (sh.contains("fd_step")) s.fd_step = positive(get_number(sh["fd_step"], "shooting.fd_step"), "shooting.fd_step");
    if (sh.contains("damping")) s.damping = positive(get_number(sh["damping"], "shooting.damping"), "shooting.damping");
    if (sh.contains("seed_scale")) s.seed_scale = positive(get_number(sh["seed_scale"], "shooting.seed_scale"), "shooting.seed_scale");
  }
  if (const auto it = doc.find("output"); it != doc.end()) {
    check_object(*it, "output", {"directory", "checkpoints"});
    if (it->contains("directory")) {
      config.output_directory =
          (config.base_dir / get_string((*it)["directory"], "output.directory")).lexically_normal();
    }
    if (it->contains("checkpoints")) {
      const json& cps = (*it)["checkpoints"];
      if (!cps.is_array() || cps.empty()) {
        throw schema_error("output.checkpoints", "expected a non-empty array of times");
      }
      config.checkpoints.clear();
      for (const auto& c : cps) {
        const double t = get_number(c, "output.checkpoints");
        if (t < 0.0 || t > 1.0) throw schema_error("output.checkpoints", "times must lie in [0, 1]");
        config.checkpoints.push_back(t);
      }
    }
  }
}

}  // namespace

ScenarioConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema_error, std::string("not a valid JSON document: ") + e.what());
  }
  check_object(doc, "", {"name", "description", "problem", "n", "m", "sigma0", "sigma1",
                         "covariance_path", "tracers", "epsilon", "n0", "integrator", "shooting",
                         "output"});
  ScenarioConfig config;
  config.base_dir = base_dir;
  const long long problem = get_integer(require(doc, "", "problem"), "problem");
  if (problem != 1 && problem != 3) throw schema_error("problem", "must be 1 or 3");
  config.problem = static_cast<int>(problem);

  const long long n = get_integer(require(doc, "", "n"), "n");
  const long long m = get_integer(require(doc, "", "m"), "m");
  if (n < 1) throw schema_error("n", "must be positive");
  if (m < 0 || m >= n) throw schema_error("m", "tracer count must satisfy 0 <= m < n");
  config.n = n;
  config.m = m;
  config.sigma0 = get_spd(require(doc, "", "sigma0"), "sigma0", config.n);
  config.sigma1 = get_spd(require(doc, "", "sigma1"), "sigma1", config.n);

  parse_covariance(doc, config);
  parse_tracers(doc, config);

  if (const auto it = doc.find("epsilon"); it != doc.end()) {
    if (config.problem != 3) throw regime_error("epsilon applies to problem 3 only");
    config.epsilon = positive(get_number(*it, "epsilon"), "epsilon");
  }
  if (const auto it = doc.find("n0"); it != doc.end()) {
    if (config.problem != 3) throw regime_error("n0 applies to problem 3 only");
    config.n0 = get_matrix(*it, "n0", config.n - config.m, config.n);
  }
  parse_sections(doc, config);
  return config;
}

ScenarioConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::schema_error, "cannot open config " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), file.parent_path());
}

CovariancePath build_covariance_path(const ScenarioConfig& config) {
  const SpdMatrix s0(config.sigma0);
  const SpdMatrix s1(config.sigma1);
  switch (config.covariance) {
    case CovarianceSource::mccann:
      return mccann_path(s0, s1);
    case CovarianceSource::endpoints:
      return CovariancePath::endpoints_only(s0, s1);
    case CovarianceSource::samples: {
      CovariancePath path = sampled_covariance_path(read_covariance_nodes(config.covariance_file, config.n));
      const auto close = [](const Matrix& a, const Matrix& b) {
        return (a - b).norm() <= 1e-10 * std::max(1.0, b.norm());
      };
      if (!close(path.start().matrix(), config.sigma0) || !close(path.end().matrix(), config.sigma1)) {
        throw schema_error("covariance_path.file", "first and last samples must equal sigma0 and sigma1");
      }
      return path;
    }
  }
  throw std::logic_error("unhandled covariance source");
}

TracerPath build_tracer_path(const ScenarioConfig& config) {
  switch (config.tracer_source) {
    case TracerSource::endpoints:
      return TracerPath::endpoints_only(config.y0, config.y1);
    case TracerSource::generator:
      return builtin_tracer_generator(config.generator, config.spiral);
    case TracerSource::samples:
      return sampled_tracer_path(read_tracer_nodes(config.tracer_file, config.n, config.m));
  }
  throw std::logic_error("unhandled tracer source");
}

Problem build_problem(const ScenarioConfig& config) {
  const TracerPath tracers = build_tracer_path(config);
  if (config.problem == 1) return make_p1_problem(build_covariance_path(config), tracers);
  const SpdMatrix s0(config.sigma0);
  const SpdMatrix s1(config.sigma1);
  if (config.n0) return make_p2_problem(s0, s1, tracers, EpsilonWeight(config.epsilon), *config.n0);
  return make_p2_problem(s0, s1, tracers, EpsilonWeight(config.epsilon));
}

}  // namespace tracersteer::cli
