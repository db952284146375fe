#pragma once

#include <vector>

#include "tracersteer/matops.hpp"

namespace tracersteer {

/// Which data regime a flow was fitted to.
///  covariance_path:   full covariance curve + tracer endpoints (kinetic cost)
///  tracer_trajectory: covariance endpoints + full tracer curve (kinetic + eps * attention)
enum class ProblemKind { covariance_path, tracer_trajectory };

struct IterationRecord {
  int candidate = 0;
  int start = 0;
  int iteration = 0;
  double residual_norm = 0.0;
  double damping = 0.0;
  int rank = 0;
};

/// Sampled flow on a uniform grid of [0, 1].
struct FlowSolution {
  ProblemKind kind = ProblemKind::covariance_path;
  double epsilon = 0.0;

  std::vector<double> times;
  std::vector<Matrix> phi;
  std::vector<Matrix> gain;
  /// Omega_t (covariance_path) or R_t (tracer_trajectory) at each node.
  std::vector<Matrix> control;
  /// ||Phi Sigma0 Phi^T - Sigma_t||_F where Sigma_t is constrained, NaN elsewhere.
  std::vector<double> residual_cov;
  /// ||Phi Y0 - Y_t||_F where Y_t is constrained, NaN elsewhere.
  std::vector<double> residual_tracer;

  double j_ke = 0.0;
  double j_a = 0.0;

  Matrix p0;
  Matrix phi1_target;  // empty in free-endpoint mode
  int candidate = 0;
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  std::vector<IterationRecord> log;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  double total_cost() const { return j_ke + epsilon * j_a; }
};

/// Composite Simpson rule over uniformly spaced samples on [0, 1]
/// (Simpson 3/8 on the last three intervals when their count is odd).
/// Throws GridTooCoarse below 16 intervals.
double simpson(const std::vector<double>& samples);

/// 1/2 int tr(K Phi Sigma0 Phi^T K^T) dt.
double kinetic_cost(const FlowSolution& solution, const SpdMatrix& sigma0);

/// 1/2 int tr(K K^T) dt.
double attention_cost(const FlowSolution& solution);

}  // namespace tracersteer
