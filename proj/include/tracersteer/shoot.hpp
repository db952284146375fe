#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tracersteer/boundary.hpp"
#include "tracersteer/necessary_p1.hpp"
#include "tracersteer/necessary_p2.hpp"
#include "tracersteer/paths.hpp"
#include "tracersteer/solution.hpp"

namespace tracersteer {

/// Uniform partition of [0, 1] for the classical RK4 scheme.
class IntegratorGrid {
 public:
  explicit IntegratorGrid(int steps) : steps_(steps) {
    if (steps < 16) {
      throw std::invalid_argument("integrator grid needs at least 16 steps, got " +
                                  std::to_string(steps));
    }
  }

  int steps() const { return steps_; }
  double step() const { return 1.0 / steps_; }
  /// Node times are computed as i / steps so the last node is exactly 1.
  double time(double i) const { return i / steps_; }

 private:
  int steps_;
};

/// Classical fourth-order Runge-Kutta march. State needs `State + State` and
/// `double * State`; observe(i, state) is called at every node and may throw
/// to abort the march.
template <typename State, typename Field, typename Observer>
State rk4_march(const Field& field, State state, const IntegratorGrid& grid, Observer&& observe) {
  const double h = grid.step();
  observe(0, state);
  for (int i = 0; i < grid.steps(); ++i) {
    const double t0 = grid.time(i);
    const double tm = grid.time(i + 0.5);
    const double t1 = grid.time(i + 1);
    const State k1 = field(t0, state);
    const State k2 = field(tm, State(state + (0.5 * h) * k1));
    const State k3 = field(tm, State(state + (0.5 * h) * k2));
    const State k4 = field(t1, State(state + h * k3));
    state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    observe(i + 1, state);
  }
  return state;
}

/// Full trajectory, one state per node.
template <typename State, typename Field>
std::vector<State> rk4_integrate(const Field& field, const State& initial,
                                 const IntegratorGrid& grid) {
  std::vector<State> nodes;
  nodes.reserve(static_cast<std::size_t>(grid.steps()) + 1);
  rk4_march(field, initial, grid, [&](int, const State& s) { nodes.push_back(s); });
  return nodes;
}

/// Covariance path plus tracer endpoints.
struct P1Problem {
  CovariancePath path;
  TerminalSurface surface;
};

/// Covariance endpoints plus tracer trajectory, attention weight and the
/// initial nullspace frame.
struct P2Problem {
  TracerPath tracers;
  TerminalSurface surface;
  EpsilonWeight eps;
  Matrix n0;
};

using Problem = std::variant<P1Problem, P2Problem>;

/// Tracer endpoints are read from the path at t = 0 and t = 1.
P1Problem make_p1_problem(const CovariancePath& path, const TracerPath& tracers);
P2Problem make_p2_problem(const SpdMatrix& sigma0, const SpdMatrix& sigma1,
                          const TracerPath& tracers, EpsilonWeight eps);
/// Uses the supplied frame instead of the orthonormal default.
P2Problem make_p2_problem(const SpdMatrix& sigma0, const SpdMatrix& sigma1,
                          const TracerPath& tracers, EpsilonWeight eps, Matrix n0);

const TerminalSurface& surface_of(const Problem& problem);
ProblemKind kind_of(const Problem& problem);
double epsilon_of(const Problem& problem);

struct TerminalState {
  Matrix phi;
  Matrix p;
};

/// Integrates the necessary-condition system from (I, p0) and returns the
/// state at t = 1. Throws FlowDegenerate when Phi or N loses rank.
TerminalState integrate_terminal(const Matrix& p0, const Problem& problem,
                                 const IntegratorGrid& grid);

/// Terminal conditions as a residual vector. With a target, vec(Phi1 - target);
/// otherwise the surface residual followed by the tangential component of
/// vec(P1), which vanishes exactly when P1 is normal to S.
Vector shooting_residual(const Matrix& p0, const Problem& problem,
                         const std::optional<Matrix>& target, const IntegratorGrid& grid,
                         double rank_tol = Tolerances{}.rank);

struct ShootingOptions {
  double residual_tol = 1e-9;
  int max_iterations = 100;
  double fd_step = 1e-6;
  double damping = 1.0;
  int multistart = 8;
  std::uint64_t seed = 1;
  /// Standard deviation of the random initial costates.
  double seed_scale = 1.0;
  double rank_tol = 1e-8;
  /// Relative singular-value cutoff of the Gauss-Newton pseudo-inverse. A
  /// forward-difference Jacobian carries O(fd_step) relative error, so
  /// directions below this level are treated as null.
  double jacobian_tol = 1e-5;
};

/// Damped Gauss-Newton with forward-difference Jacobian and minimum-norm
/// steps, repeated from P0 = 0 and multistart - 1 random costates. The
/// endpoint mode is determined when S is a discrete set (each reachable
/// candidate is tried) and free otherwise. Returns the converged solution of
/// least total cost; if nothing converged, the attempt with the smallest
/// residual is returned with converged = false.
FlowSolution solve_shooting(const Problem& problem, const IntegratorGrid& grid,
                            const ShootingOptions& opts = {});

/// Throws NoConvergence unless solution.converged.
void require_converged(const FlowSolution& solution);

/// Samples the flow from a given initial costate: Phi, K, control, node
/// residuals and both costs.
FlowSolution sample_flow(const Matrix& p0, const Problem& problem, const IntegratorGrid& grid);

/// Largest ||r_{k+1}|| / ||r_k||^2 over the final `window` accepted steps of
/// one start, a proxy for local quadratic convergence.
double quadratic_convergence_ratio(const std::vector<IterationRecord>& log, int candidate,
                                   int start, int window = 3);

}  // namespace tracersteer
