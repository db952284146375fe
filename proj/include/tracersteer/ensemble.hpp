#pragma once

#include <cstdint>
#include <vector>

#include "tracersteer/shoot.hpp"

namespace tracersteer {

struct CheckpointError {
  double t = 0.0;
  Matrix empirical;
  Matrix target;
  /// ||empirical - target||_F / ||target||_F.
  double relative_error = 0.0;
};

struct EnsembleReport {
  int particles = 0;
  std::uint64_t seed = 0;
  std::vector<CheckpointError> checkpoints;
  /// ||Y(1) - Y1||_F for the simulated tracer columns.
  double tracer_endpoint_error = 0.0;
  /// max_t ||Y(t) - Y_t||_F over the grid; NaN when only endpoints are known.
  double tracer_path_error = 0.0;
  double wall_seconds = 0.0;

  double max_relative_error() const;
};

/// Integrates x' = K_t x for `particles` samples x0 ~ N(0, sigma0) together
/// with the tracer columns of Y0, using RK4 on the solution grid (midpoint
/// gains by cubic interpolation of the node gains). Samples come from a
/// counter-based generator, so the result depends only on (seed, particles).
EnsembleReport simulate_ensemble(const FlowSolution& solution, const SpdMatrix& sigma0,
                                 const TracerPath& tracers, int particles, std::uint64_t seed,
                                 const std::vector<double>& checkpoints = {0.0, 0.25, 0.5, 0.75,
                                                                           1.0});

struct PerturbationOptions {
  std::vector<double> magnitudes{1e-3, 1e-2};
  int trials = 32;
  std::uint64_t seed = 1;
  /// Cost decreases smaller than this are treated as round-off.
  double tolerance = 1e-8;
};

struct PerturbationTrial {
  int trial = 0;
  double delta = 0.0;
  double delta_cost_plus = 0.0;
  double delta_cost_minus = 0.0;
  /// (plus - minus) / (2 delta): first-order coefficient.
  double slope = 0.0;
  /// (plus + minus) / (2 delta^2): quadratic coefficient.
  double curvature = 0.0;
  /// Terminal constraint residual left after restoration (worse sign).
  double terminal_residual = 0.0;
};

struct PerturbationReport {
  std::vector<PerturbationTrial> trials;
  double base_cost = 0.0;
  double max_terminal_residual = 0.0;
  double min_delta_cost = 0.0;
  /// Fraction of evaluations with delta cost >= -tolerance.
  double fraction_increased = 0.0;
  double max_abs_slope = 0.0;
  double median_curvature = 0.0;
  /// Largest |slope| * delta relative to the matching quadratic term; small
  /// values mean the cost change is dominated by the delta^2 term.
  double first_order_ratio = 0.0;
  bool locally_optimal = false;
};

/// Perturbs the control (Omega for covariance-path problems, R for
/// tracer-trajectory problems) by +/- delta B_t with random smooth curves
/// B_t = sum_l sin(l pi t) S_l, restores the terminal constraint with a
/// minimum-norm affine-in-t correction, and compares costs against the
/// equally re-evaluated base control. The running constraints hold by
/// construction of the gain.
PerturbationReport perturbation_optimality_check(const FlowSolution& solution,
                                                 const Problem& problem,
                                                 const PerturbationOptions& opts = {});

struct OracleOptions {
  int intervals = 16;
  int steps = 512;
  int max_iterations = 150;
  double fd_step = 1e-6;
  double feasibility_tol = 1e-10;
};

struct OracleResult {
  double cost = 0.0;
  double feasibility = 0.0;
  int iterations = 0;
  bool feasible = false;
};

/// Minimizes the cost over piecewise-constant controls on `intervals` equal
/// pieces by projected finite-difference gradient descent with feasibility
/// restoration. The returned cost belongs to a feasible control, so it
/// bounds the true optimum from above.
OracleResult transcription_oracle(const Problem& problem, const OracleOptions& opts = {});

}  // namespace tracersteer
