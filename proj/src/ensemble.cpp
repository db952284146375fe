#include "tracersteer/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "tracersteer/log.hpp"
#include "tracersteer/rng.hpp"

namespace tracersteer {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Node samples refined to half steps (2N - 1 entries); midpoints by the
/// four-point cubic interpolant, one-sided at both ends.
std::vector<Matrix> refine_to_half_steps(const std::vector<Matrix>& nodes) {
  const int count = static_cast<int>(nodes.size());
  if (count < 4) throw std::invalid_argument("need at least four samples to interpolate");
  std::vector<Matrix> out;
  out.reserve(2 * nodes.size() - 1);
  for (int i = 0; i + 1 < count; ++i) {
    out.push_back(nodes[i]);
    if (i == 0) {
      out.push_back((5.0 * nodes[0] + 15.0 * nodes[1] - 5.0 * nodes[2] + nodes[3]) / 16.0);
    } else if (i == count - 2) {
      out.push_back((nodes[i - 2] - 5.0 * nodes[i - 1] + 15.0 * nodes[i] + 5.0 * nodes[i + 1]) /
                    16.0);
    } else {
      out.push_back((-nodes[i - 1] + 9.0 * nodes[i] + 9.0 * nodes[i + 1] - nodes[i + 2]) / 16.0);
    }
  }
  out.push_back(nodes.back());
  return out;
}

int nearest_node(double t, int steps) {
  if (t < 0.0 || t > 1.0) throw Error(ErrorKind::out_of_domain, "checkpoint outside [0, 1]");
  return static_cast<int>(std::lround(t * steps));
}

struct FlowState {
  Matrix phi;
  Matrix nmat;
  double cost = 0.0;
};

FlowState operator+(const FlowState& a, const FlowState& b) {
  return {a.phi + b.phi, a.nmat + b.nmat, a.cost + b.cost};
}

FlowState operator*(double s, const FlowState& a) { return {s * a.phi, s * a.nmat, s * a.cost}; }

/// Gain built from a free control (Omega or R) on a fixed half-step table of
/// the problem data; the running constraint holds for every control.
class ControlledFlow {
 public:
  struct Result {
    Matrix phi1;
    double cost = 0.0;
  };

  ControlledFlow(const Problem& problem, int steps) : problem_(problem), grid_(steps) {
    const int half = 2 * steps + 1;
    const TerminalSurface& surface = surface_of(problem);
    sigma0_ = surface.sigma0().matrix();
    if (const auto* p1 = std::get_if<P1Problem>(&problem)) {
      for (int j = 0; j < half; ++j) {
        const CovarianceSample s = p1->path.evaluate(half_time(j));
        const Matrix inv = s.sigma.inverse();
        drift_.push_back(0.5 * s.sigma_dot * inv);
        weight_.push_back(inv);
      }
      const Eigen::Index n = surface.n();
      for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
          Matrix e = Matrix::Zero(n, n);
          e(a, b) = 1.0 / std::sqrt(2.0);
          e(b, a) = -1.0 / std::sqrt(2.0);
          basis_.push_back(std::move(e));
        }
      }
    } else {
      const auto& p2 = std::get<P2Problem>(problem);
      epsilon_ = p2.eps.value();
      n0_ = p2.n0;
      for (int j = 0; j < half; ++j) {
        const TracerSample y = p2.tracers.evaluate(half_time(j));
        drift_.push_back(projector_m(y.y, y.y_dot));
      }
      for (Eigen::Index b = 0; b < n0_.rows(); ++b) {
        for (Eigen::Index a = 0; a < surface.n(); ++a) {
          Matrix e = Matrix::Zero(surface.n(), n0_.rows());
          e(a, b) = 1.0;
          basis_.push_back(std::move(e));
        }
      }
    }
  }

  int steps() const { return grid_.steps(); }
  double half_time(int j) const { return grid_.time(0.5 * j); }
  const std::vector<Matrix>& basis() const { return basis_; }
  const TerminalSurface& surface() const { return surface_of(problem_); }
  bool is_p1() const { return std::holds_alternative<P1Problem>(problem_); }

  /// control(i, j) is the control used by RK4 step i at half-step index j.
  template <typename Control>
  Result run(const Control& control) const {
    const Eigen::Index n = sigma0_.rows();
    FlowState state{Matrix::Identity(n, n), n0_, 0.0};
    const double h = grid_.step();
    for (int i = 0; i < grid_.steps(); ++i) {
      const FlowState k1 = field(2 * i, control(i, 2 * i), state);
      const FlowState k2 = field(2 * i + 1, control(i, 2 * i + 1), state + (0.5 * h) * k1);
      const FlowState k3 = field(2 * i + 1, control(i, 2 * i + 1), state + (0.5 * h) * k2);
      const FlowState k4 = field(2 * i + 2, control(i, 2 * i + 2), state + h * k3);
      state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return {state.phi, state.cost};
  }

 private:
  FlowState field(int j, const Matrix& control, const FlowState& s) const {
    FlowState d;
    Matrix gain;
    if (is_p1()) {
      gain = drift_[j] + control * weight_[j];
    } else {
      gain = drift_[j] + control * s.nmat;
      d.nmat = -s.nmat * drift_[j];
    }
    d.phi = gain * s.phi;
    d.cost = 0.5 * (d.phi * sigma0_ * d.phi.transpose()).trace() +
             0.5 * epsilon_ * gain.squaredNorm();
    return d;
  }

  const Problem& problem_;
  IntegratorGrid grid_;
  Matrix sigma0_;
  Matrix n0_;
  double epsilon_ = 0.0;
  std::vector<Matrix> drift_;
  std::vector<Matrix> weight_;
  std::vector<Matrix> basis_;
};

Matrix combine(const std::vector<Matrix>& basis, const double* coeffs) {
  Matrix out = Matrix::Zero(basis.front().rows(), basis.front().cols());
  for (std::size_t k = 0; k < basis.size(); ++k) out += coeffs[k] * basis[k];
  return out;
}

template <typename ResidualFn>
Matrix forward_jacobian(const ResidualFn& residual, const Vector& x, const Vector& r, double h) {
  Matrix jac(r.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector probe = x;
    probe(k) += h;
    jac.col(k) = (residual(probe) - r) / h;
  }
  return jac;
}

/// Minimum-norm Newton restoration of residual(x) = 0. Chord steps reuse
/// `jac` until one fails to reduce the residual; the Jacobian is then
/// rebuilt by forward differences. Returns the final residual norm.
template <typename ResidualFn>
double restore_feasibility(const ResidualFn& residual, Vector& x, Matrix& jac, double tol,
                           int max_iterations, double fd_step) {
  constexpr double kCutoff = 1e-4;
  Vector r = residual(x);
  double norm = r.norm();
  if (jac.size() == 0) jac = forward_jacobian(residual, x, r, fd_step);
  bool fresh = false;
  for (int it = 0; it < max_iterations && norm > tol; ++it) {
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kCutoff);
    const Vector step = svd.solve(r);
    bool accepted = false;
    for (double lambda = 1.0; lambda > 1e-4; lambda *= 0.5) {
      const Vector trial = x - lambda * step;
      const Vector trial_r = residual(trial);
      if (trial_r.norm() < norm) {
        x = trial;
        r = trial_r;
        norm = r.norm();
        accepted = true;
        break;
      }
      if (!fresh) break;
    }
    if (accepted) {
      fresh = false;
    } else if (!fresh) {
      jac = forward_jacobian(residual, x, r, fd_step);
      fresh = true;
    } else {
      break;
    }
  }
  return norm;
}

}  // namespace

double EnsembleReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& c : checkpoints) worst = std::max(worst, c.relative_error);
  return worst;
}

EnsembleReport simulate_ensemble(const FlowSolution& solution, const SpdMatrix& sigma0,
                                 const TracerPath& tracers, int particles, std::uint64_t seed,
                                 const std::vector<double>& checkpoints) {
  if (particles < 100) throw std::invalid_argument("ensemble needs at least 100 particles");
  const auto start_clock = std::chrono::steady_clock::now();
  const int steps = solution.steps();
  const IntegratorGrid grid(steps);
  const Eigen::Index n = sigma0.size();
  const Matrix y0 = tracers.at(0.0);
  const Eigen::Index m = y0.cols();

  Matrix state(n, particles + m);
  {
    Matrix z(n, particles);
    for (int p = 0; p < particles; ++p) {
      for (Eigen::Index i = 0; i < n; ++i) {
        z(i, p) = counter_normal(seed, static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(i));
      }
    }
    state.leftCols(particles) = sigma0.sqrt().matrix() * z;
    state.rightCols(m) = y0;
  }

  std::vector<int> checkpoint_nodes;
  for (double t : checkpoints) checkpoint_nodes.push_back(nearest_node(t, steps));

  EnsembleReport report;
  report.particles = particles;
  report.seed = seed;
  report.tracer_path_error = tracers.kind() == TracerPathKind::trajectory ? 0.0 : kNaN;

  const auto observe = [&](int node) {
    for (std::size_t c = 0; c < checkpoint_nodes.size(); ++c) {
      if (checkpoint_nodes[c] != node) continue;
      const auto x = state.leftCols(particles);
      CheckpointError e;
      e.t = grid.time(node);
      e.empirical = x * x.transpose() / static_cast<double>(particles);
      e.target = solution.phi[node] * sigma0.matrix() * solution.phi[node].transpose();
      e.relative_error = (e.empirical - e.target).norm() / e.target.norm();
      report.checkpoints.push_back(std::move(e));
    }
    if (tracers.kind() == TracerPathKind::trajectory) {
      report.tracer_path_error = std::max(
          report.tracer_path_error, (state.rightCols(m) - tracers.at(grid.time(node))).norm());
    }
  };

  const std::vector<Matrix> gains = refine_to_half_steps(solution.gain);
  const double h = grid.step();
  observe(0);
  for (int i = 0; i < steps; ++i) {
    const Matrix k1 = gains[2 * i] * state;
    const Matrix k2 = gains[2 * i + 1] * (state + (0.5 * h) * k1);
    const Matrix k3 = gains[2 * i + 1] * (state + (0.5 * h) * k2);
    const Matrix k4 = gains[2 * i + 2] * (state + h * k3);
    state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    observe(i + 1);
  }
  report.tracer_endpoint_error = (state.rightCols(m) - tracers.at(1.0)).norm();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_clock).count();
  return report;
}

PerturbationReport perturbation_optimality_check(const FlowSolution& solution,
                                                 const Problem& problem,
                                                 const PerturbationOptions& opts) {
  const ControlledFlow flow(problem, solution.steps());
  const std::vector<Matrix> base = refine_to_half_steps(solution.control);
  const std::vector<Matrix>& basis = flow.basis();
  const auto dim = static_cast<Eigen::Index>(basis.size());
  const TerminalSurface& surface = flow.surface();

  // Correction coefficients: (constant, linear-in-t) x control basis.
  const auto run = [&](const std::function<Matrix(double)>& perturbation, const Vector& c) {
    return flow.run([&](int, int j) {
      const double t = flow.half_time(j);
      Matrix u = base[j] + perturbation(t);
      for (Eigen::Index k = 0; k < dim; ++k) u += (c(k) + c(dim + k) * t) * basis[k];
      return u;
    });
  };
  const auto corrected_cost = [&](const std::function<Matrix(double)>& perturbation,
                                  Vector& c) -> std::pair<double, double> {
    const auto residual = [&](const Vector& x) {
      return surface_residual(run(perturbation, x).phi1, surface);
    };
    Matrix jac;
    const double feasibility = restore_feasibility(residual, c, jac, 1e-13, 30, 1e-7);
    return {run(perturbation, c).cost, feasibility};
  };

  const auto zero = [&](double) { return Matrix::Zero(basis[0].rows(), basis[0].cols()).eval(); };
  Vector c_base = Vector::Zero(2 * dim);
  PerturbationReport report;
  const auto [base_cost, base_feasibility] = corrected_cost(zero, c_base);
  report.base_cost = base_cost;
  log(LogLevel::info, "perturbation check: base cost ", base_cost, ", terminal residual ",
      base_feasibility);

  int increased = 0;
  int evaluations = 0;
  report.min_delta_cost = std::numeric_limits<double>::infinity();
  std::vector<double> curvatures;
  for (int trial = 0; trial < opts.trials; ++trial) {
    std::vector<Matrix> modes;
    for (int l = 1; l <= 3; ++l) {
      Vector coeffs(dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        coeffs(k) = counter_normal(opts.seed, static_cast<std::uint64_t>(trial),
                                   static_cast<std::uint64_t>((l - 1) * dim + k)) /
                    l;
      }
      modes.push_back(combine(basis, coeffs.data()));
    }
    const auto shape = [&](double t) {
      Matrix b = Matrix::Zero(basis[0].rows(), basis[0].cols());
      for (int l = 1; l <= 3; ++l) b += std::sin(l * std::numbers::pi * t) * modes[l - 1];
      return b;
    };
    for (double delta : opts.magnitudes) {
      PerturbationTrial rec;
      rec.trial = trial;
      rec.delta = delta;
      Vector c_plus = c_base;
      Vector c_minus = c_base;
      const auto plus =
          corrected_cost([&](double t) { return (delta * shape(t)).eval(); }, c_plus);
      const auto minus =
          corrected_cost([&](double t) { return (-delta * shape(t)).eval(); }, c_minus);
      rec.delta_cost_plus = plus.first - base_cost;
      rec.delta_cost_minus = minus.first - base_cost;
      rec.terminal_residual = std::max(plus.second, minus.second);
      report.max_terminal_residual = std::max(report.max_terminal_residual, rec.terminal_residual);
      rec.slope = (rec.delta_cost_plus - rec.delta_cost_minus) / (2.0 * delta);
      rec.curvature = (rec.delta_cost_plus + rec.delta_cost_minus) / (2.0 * delta * delta);
      for (double d : {rec.delta_cost_plus, rec.delta_cost_minus}) {
        ++evaluations;
        if (d >= -opts.tolerance) ++increased;
        report.min_delta_cost = std::min(report.min_delta_cost, d);
      }
      report.max_abs_slope = std::max(report.max_abs_slope, std::abs(rec.slope));
      report.first_order_ratio =
          std::max(report.first_order_ratio,
                   std::abs(rec.slope) * delta /
                       std::max(std::abs(rec.curvature) * delta * delta, 1e-300));
      curvatures.push_back(rec.curvature);
      log(LogLevel::debug, "trial ", trial, " delta ", delta, ": ", rec.delta_cost_plus, " / ",
          rec.delta_cost_minus, " terminal residual ", rec.terminal_residual);
      report.trials.push_back(rec);
    }
  }
  if (!curvatures.empty()) {
    std::nth_element(curvatures.begin(), curvatures.begin() + curvatures.size() / 2,
                     curvatures.end());
    report.median_curvature = curvatures[curvatures.size() / 2];
  }
  report.fraction_increased =
      evaluations == 0 ? 1.0 : static_cast<double>(increased) / static_cast<double>(evaluations);
  report.locally_optimal = evaluations == 0 || report.min_delta_cost >= -opts.tolerance;
  if (evaluations == 0) report.min_delta_cost = 0.0;
  return report;
}

OracleResult transcription_oracle(const Problem& problem, const OracleOptions& opts) {
  if (opts.intervals < 1 || opts.steps % opts.intervals != 0) {
    throw std::invalid_argument("oracle steps must be a multiple of the interval count");
  }
  const ControlledFlow flow(problem, opts.steps);
  const std::vector<Matrix>& basis = flow.basis();
  const auto dim = static_cast<Eigen::Index>(basis.size());
  const int per_interval = opts.steps / opts.intervals;
  const TerminalSurface& surface = flow.surface();

  const auto run = [&](const Vector& theta) {
    return flow.run([&](int i, int) { return combine(basis, theta.data() + (i / per_interval) * dim); });
  };
  const auto residual = [&](const Vector& theta) { return surface_residual(run(theta).phi1, surface); };

  // One pass of forward differences yields both the constraint Jacobian and
  // the cost gradient.
  const auto linearize = [&](const Vector& theta, Matrix& jac, Vector& grad) {
    const auto center = run(theta);
    const Vector r = surface_residual(center.phi1, surface);
    jac.resize(r.size(), theta.size());
    grad.resize(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Vector probe = theta;
      probe(k) += opts.fd_step;
      const auto shifted = run(probe);
      jac.col(k) = (surface_residual(shifted.phi1, surface) - r) / opts.fd_step;
      grad(k) = (shifted.cost - center.cost) / opts.fd_step;
    }
  };

  Vector theta = Vector::Zero(opts.intervals * dim);
  Matrix jac;
  Vector grad;
  OracleResult result;
  result.feasibility =
      restore_feasibility(residual, theta, jac, opts.feasibility_tol, 50, opts.fd_step);
  double cost = run(theta).cost;
  double step = 1.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    linearize(theta, jac, grad);
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeFullV);
    svd.setThreshold(1e-4);
    const Eigen::Index rank = svd.rank();
    const Matrix normal = svd.matrixV().leftCols(rank);
    const Vector descent = -(grad - normal * (normal.transpose() * grad));
    const double slope = descent.squaredNorm();
    if (slope < 1e-20) break;
    bool accepted = false;
    while (step > 1e-12) {
      Vector trial = theta + step * descent;
      Matrix chord = jac;
      const double feasibility =
          restore_feasibility(residual, trial, chord, opts.feasibility_tol, 50, opts.fd_step);
      const double trial_cost = run(trial).cost;
      if (feasibility <= std::max(opts.feasibility_tol, result.feasibility) &&
          trial_cost <= cost - 1e-4 * step * slope) {
        theta = std::move(trial);
        cost = trial_cost;
        result.feasibility = feasibility;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.iterations = it + 1;
    if (!accepted) break;
    log(LogLevel::debug, "oracle iteration ", it, " cost ", cost, " step ", step);
    step = std::min(step * 2.0, 1e3);
  }
  result.cost = cost;
  result.feasible = result.feasibility <= 1e-8;
  log(LogLevel::info, "transcription oracle: cost ", cost, " after ", result.iterations,
      " iterations, terminal residual ", result.feasibility);
  return result;
}

}  // namespace tracersteer
