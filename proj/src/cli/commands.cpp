#include "tracersteer/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "tracersteer/log.hpp"
#include "tracersteer/necessary_p1.hpp"
#include "tracersteer/necessary_p2.hpp"

namespace tracersteer::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kInvarianceTol = 1e-6;
constexpr double kLyapunovTol = 1e-8;
constexpr double kStationarityTol = 1e-9;
constexpr double kRoundTripTol = 1e-12;
constexpr double kCrossCostTol = 1e-4;
constexpr double kFirstOrderRatioTol = 1e-2;

double relative_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

/// Fourth-order finite-difference derivative of uniformly spaced samples.
std::vector<Matrix> differentiate(const std::vector<Matrix>& f) {
  const int count = static_cast<int>(f.size());
  const double h = 1.0 / (count - 1);
  std::vector<Matrix> out(count);
  for (int i = 0; i < count; ++i) {
    if (i >= 2 && i + 2 < count) {
      out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    } else if (i < 2) {
      out[i] = (-25.0 * f[i] + 48.0 * f[i + 1] - 36.0 * f[i + 2] + 16.0 * f[i + 3] -
                3.0 * f[i + 4]) /
               (12.0 * h);
    } else {
      out[i] = (25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3] +
                3.0 * f[i - 4]) /
               (12.0 * h);
    }
  }
  return out;
}

/// Largest |a_i - b_i|; a NaN on only one side counts as infinite.
double max_column_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) && std::isnan(b[i])) continue;
    if (std::isnan(a[i]) != std::isnan(b[i])) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

double max_finite(const std::vector<double>& v) {
  double worst = 0.0;
  for (double x : v) {
    if (!std::isnan(x)) worst = std::max(worst, x);
  }
  return worst;
}

void add(CheckReport& report, std::string name, double value, double limit) {
  report.items.push_back({std::move(name), value, limit, value <= limit});
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::no_convergence:
    case ErrorKind::flow_degenerate:
    case ErrorKind::singular_inner_matrix:
      return exit_no_convergence;
    case ErrorKind::infeasible_surface:
      return exit_infeasible;
    case ErrorKind::file_format:
      return exit_file_format;
    case ErrorKind::check_failed:
      return exit_check_failed;
    default:
      return exit_usage;
  }
}

bool CheckReport::passed() const {
  return std::all_of(items.begin(), items.end(), [](const CheckItem& i) { return i.passed; });
}

StoredSolution solve_scenario(const ScenarioConfig& config) {
  const Problem problem = build_problem(config);
  const IntegratorGrid grid(config.steps);
  StoredSolution stored;
  stored.flow = solve_shooting(problem, grid, config.shooting);
  stored.problem = config.problem;
  const TerminalSurface& surface = surface_of(problem);
  stored.sigma0 = surface.sigma0().matrix();
  stored.sigma1 = surface.sigma1().matrix();
  stored.y0 = surface.y0();
  stored.y1 = surface.y1();
  stored.residual_tol = config.shooting.residual_tol;
  if (const auto* p2 = std::get_if<P2Problem>(&problem)) {
    for (double t : stored.flow.times) stored.tracer_nodes.push_back({t, p2->tracers.at(t)});
  }
  return stored;
}

CostSummary recompute_costs(const StoredSolution& stored) {
  return {kinetic_cost(stored.flow, SpdMatrix(stored.sigma0)), attention_cost(stored.flow),
          stored.flow.epsilon};
}

CheckReport check_solution(const StoredSolution& stored, const ScenarioConfig& config,
                           const PerturbationOptions& perturbation) {
  CheckReport report;
  const FlowSolution& flow = stored.flow;
  const Problem problem = build_problem(config);
  const TerminalSurface& surface = surface_of(problem);
  const Eigen::Index n = surface.n();
  const int count = static_cast<int>(flow.times.size());

  if (stored.problem != config.problem || stored.sigma0.rows() != n ||
      stored.y0.cols() != surface.m()) {
    add(report, "data_consistency", std::numeric_limits<double>::infinity(), 1e-12);
    return report;
  }
  add(report, "data_consistency",
      std::max({(stored.sigma0 - surface.sigma0().matrix()).norm(),
                (stored.sigma1 - surface.sigma1().matrix()).norm(),
                (stored.y0 - surface.y0()).norm(), (stored.y1 - surface.y1()).norm()}),
      1e-12);
  add(report, "converged", flow.converged ? flow.residual_norm : std::numeric_limits<double>::infinity(),
      stored.residual_tol);
  add(report, "phi0_identity", (flow.phi.front() - Matrix::Identity(n, n)).norm(), 1e-14);
  add(report, "terminal_surface", surface_residual(flow.phi.back(), surface).norm(),
      kInvarianceTol);

  // Residual columns recomputed from the stored transitions.
  std::vector<double> cov(count, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> tracer(count, std::numeric_limits<double>::quiet_NaN());
  const Matrix& s0 = surface.sigma0().matrix();
  const auto cov_gap = [&](int i, const Matrix& target) {
    return (flow.phi[i] * s0 * flow.phi[i].transpose() - target).norm();
  };
  const auto tracer_gap = [&](int i, const Matrix& target) {
    return (flow.phi[i] * surface.y0() - target).norm();
  };
  const IntegratorGrid grid(count - 1);
  if (const auto* p1 = std::get_if<P1Problem>(&problem)) {
    double lyapunov = 0.0;
    double skew = 0.0;
    for (int i = 0; i < count; ++i) {
      const CovarianceSample s = p1->path.evaluate(flow.times[i]);
      cov[i] = cov_gap(i, s.sigma.matrix());
      lyapunov = std::max(lyapunov, lyapunov_residual(flow.gain[i], s.sigma.matrix(), s.sigma_dot));
      const Matrix omega = flow.gain[i] * s.sigma.matrix() - 0.5 * s.sigma_dot;
      skew = std::max(skew, (omega + omega.transpose()).norm());
    }
    tracer.front() = tracer_gap(0, surface.y0());
    tracer.back() = tracer_gap(count - 1, surface.y1());
    add(report, "covariance_invariance", max_finite(cov), kInvarianceTol);
    add(report, "lyapunov_identity", lyapunov, kLyapunovTol);
    add(report, "omega_skew", skew, kLyapunovTol);
  } else {
    const auto& p2 = std::get<P2Problem>(problem);
    double tracer_ode = 0.0;
    for (int i = 0; i < count; ++i) {
      const TracerSample y = p2.tracers.evaluate(flow.times[i]);
      tracer[i] = tracer_gap(i, y.y);
      tracer_ode = std::max(tracer_ode, (flow.gain[i] * y.y - y.y_dot).norm() /
                                            std::max(1.0, y.y_dot.norm()));
    }
    cov.front() = cov_gap(0, s0);
    cov.back() = cov_gap(count - 1, surface.sigma1().matrix());
    add(report, "tracer_invariance", max_finite(tracer), kInvarianceTol);
    add(report, "tracer_ode", tracer_ode, kLyapunovTol);

    const auto field = [&](double t, const P2State& s) {
      return p2_vector_field(t, s, p2.tracers, surface.sigma0(), p2.eps);
    };
    const auto states =
        rk4_integrate(field, P2State{Matrix::Identity(n, n), flow.p0, p2.n0}, grid);
    double stationarity = 0.0;
    double frame = 0.0;
    for (int i = 0; i < count; ++i) {
      const P2Eval e = evaluate_p2(flow.times[i], states[i], p2.tracers, surface.sigma0(), p2.eps);
      const Matrix g = r_stationarity(states[i].phi, states[i].p, states[i].nmat, e.m_proj, e.r,
                                      surface.sigma0(), p2.eps);
      const double scale =
          std::max(1.0, (states[i].p * states[i].phi.transpose() * states[i].nmat.transpose()).norm());
      stationarity = std::max(stationarity, g.norm() / scale);
      frame = std::max(frame, (states[i].nmat * p2.tracers.at(flow.times[i])).norm());
    }
    add(report, "r_stationarity", stationarity, kStationarityTol);
    add(report, "nullspace_frame", frame, kLyapunovTol);
  }
  add(report, "residual_cov_roundtrip", max_column_gap(cov, flow.residual_cov), kRoundTripTol);
  add(report, "residual_tracer_roundtrip", max_column_gap(tracer, flow.residual_tracer),
      kRoundTripTol);

  const CostSummary costs = recompute_costs(stored);
  add(report, "cost_roundtrip",
      std::max(relative_gap(costs.j_ke, flow.j_ke), relative_gap(costs.j_a, flow.j_a)), 1e-12);

  FlowSolution from_phi = flow;
  const std::vector<Matrix> phi_dot = differentiate(flow.phi);
  for (int i = 0; i < count; ++i) from_phi.gain[i] = phi_dot[i] * flow.phi[i].inverse();
  add(report, "cost_cross_consistency",
      std::max(relative_gap(kinetic_cost(from_phi, surface.sigma0()), costs.j_ke),
               relative_gap(attention_cost(from_phi), costs.j_a)),
      kCrossCostTol);

  FlowSolution fresh = sample_flow(flow.p0, problem, grid);
  double drift = 0.0;
  for (int i = 0; i < count; ++i) {
    drift = std::max({drift, (fresh.phi[i] - flow.phi[i]).norm() / std::max(1.0, flow.phi[i].norm()),
                      (fresh.gain[i] - flow.gain[i]).norm() / std::max(1.0, flow.gain[i].norm())});
  }
  add(report, "costate_reintegration", drift, 1e-9);

  const PerturbationReport pert = perturbation_optimality_check(fresh, problem, perturbation);
  add(report, "perturbation_cost_decrease", std::max(0.0, -pert.min_delta_cost),
      perturbation.tolerance);
  add(report, "perturbation_first_order_ratio", pert.first_order_ratio, kFirstOrderRatioTol);
  return report;
}

int run_solve(const ScenarioConfig& config, const fs::path& out_dir, std::ostream& out) {
  const StoredSolution stored = solve_scenario(config);
  write_solution(out_dir, stored);
  const FlowSolution& flow = stored.flow;
  out << "converged: " << (flow.converged ? "yes" : "no") << "\n"
      << "residual_norm: " << format_double(flow.residual_norm) << "\n"
      << "iterations: " << flow.iterations << "\n"
      << "j_ke: " << format_double(flow.j_ke) << "\n"
      << "j_a: " << format_double(flow.j_a) << "\n"
      << "total_cost: " << format_double(flow.total_cost()) << "\n"
      << "phi1:\n" << flow.phi.back() << "\n"
      << "written to " << out_dir.string() << "\n";
  if (!flow.converged) {
    log(LogLevel::error, "shooting did not converge; best residual ", flow.residual_norm);
    return exit_no_convergence;
  }
  return exit_ok;
}

int run_simulate(const fs::path& dir, int particles, std::uint64_t seed, std::ostream& out) {
  const StoredSolution stored = read_solution(dir);
  const TracerPath tracers = stored.problem == 1
                                 ? TracerPath::endpoints_only(stored.y0, stored.y1)
                                 : sampled_tracer_path(stored.tracer_nodes);
  const EnsembleReport report =
      simulate_ensemble(stored.flow, SpdMatrix(stored.sigma0), tracers, particles, seed);
  write_ensemble(dir, report);
  out << "particles: " << report.particles << "  seed: " << report.seed << "\n";
  for (const auto& c : report.checkpoints) {
    out << "t = " << c.t << "  relative covariance error " << format_double(c.relative_error)
        << "\n";
  }
  out << "tracer endpoint error: " << format_double(report.tracer_endpoint_error) << "\n";
  return exit_ok;
}

int run_check(const fs::path& dir, const ScenarioConfig& config, std::ostream& out) {
  const StoredSolution stored = read_solution(dir);
  const CheckReport report = check_solution(stored, config);
  json items = json::array();
  for (const auto& item : report.items) {
    out << (item.passed ? "PASS " : "FAIL ") << item.name << "  value " << format_double(item.value)
        << "  limit " << format_double(item.limit) << "\n";
    items.push_back({{"name", item.name},
                     {"value", std::isfinite(item.value) ? json(item.value) : json(nullptr)},
                     {"limit", item.limit},
                     {"passed", item.passed}});
  }
  std::ofstream(dir / "check.json") << json{{"passed", report.passed()}, {"items", items}}.dump(2)
                                    << "\n";
  if (!report.passed()) {
    std::string failed;
    for (const auto& item : report.items) {
      if (!item.passed) failed += (failed.empty() ? "" : ", ") + item.name;
    }
    log(LogLevel::error, "check failed: ", failed);
    return exit_check_failed;
  }
  return exit_ok;
}

int run_cost(const fs::path& dir, std::ostream& out) {
  const StoredSolution stored = read_solution(dir);
  const CostSummary costs = recompute_costs(stored);
  out << "j_ke: " << format_double(costs.j_ke) << "\n"
      << "j_a: " << format_double(costs.j_a) << "\n"
      << "epsilon: " << format_double(costs.epsilon) << "\n"
      << "total_cost: " << format_double(costs.total()) << "\n";
  return exit_ok;
}

}  // namespace tracersteer::cli
