#include <gtest/gtest.h>

#include <cmath>

#include "tracersteer/cli/generators.hpp"
#include "tracersteer/ensemble.hpp"

using namespace tracersteer;

namespace {

Matrix column(double a, double b) {
  Matrix y(2, 1);
  y << a, b;
  return y;
}

Matrix example1_sigma1() {
  const double r2 = std::sqrt(2.0);
  Matrix s(2, 2);
  s << 2, r2, r2, 2;
  return s;
}

Problem example1_problem() {
  return make_p1_problem(mccann_path(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(example1_sigma1())),
                         TracerPath::endpoints_only(column(-1, 0), column(0, 1)));
}

Problem example2_problem(double epsilon) {
  const double r3 = std::sqrt(3.0);
  return make_p2_problem(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(Matrix(3.0 * Matrix::Identity(2, 2))),
                         cli::spiral_tracer_path({column(-r3 / 2, 0.5), r3, -120.0}), EpsilonWeight(epsilon));
}

Problem trivial_problem() {
  const SpdMatrix id(Matrix::Identity(2, 2));
  return make_p1_problem(mccann_path(id, id), TracerPath::endpoints_only(column(1, 0), column(1, 0)));
}

FlowSolution constant_gain(const Matrix& k, int steps) {
  FlowSolution sol;
  for (int i = 0; i <= steps; ++i) {
    sol.times.push_back(double(i) / steps);
    sol.phi.push_back(Matrix::Identity(2, 2));
    sol.gain.push_back(k);
  }
  return sol;
}

}  // namespace

TEST(Simpson, ExactForCubics) {
  for (int steps : {16, 17, 33}) {
    std::vector<double> f;
    for (int i = 0; i <= steps; ++i) {
      const double t = double(i) / steps;
      f.push_back(4 * t * t * t - 3 * t * t + 1);
    }
    EXPECT_NEAR(simpson(f), 1.0, 1e-14);
  }
  EXPECT_EQ([] {
    try {
      simpson(std::vector<double>(10, 1.0));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::check_failed;
  }(), ErrorKind::grid_too_coarse);
}

TEST(Costs, ZeroGain) {
  const FlowSolution sol = constant_gain(Matrix::Zero(2, 2), 16);
  EXPECT_EQ(kinetic_cost(sol, SpdMatrix(Matrix::Identity(2, 2))), 0.0);
  EXPECT_EQ(attention_cost(sol), 0.0);
}

TEST(Costs, ConstantSkewAttention) {
  Matrix k(2, 2);
  k << 0, 1, -1, 0;
  EXPECT_NEAR(attention_cost(constant_gain(k, 32)), 1.0, 1e-15);
}

TEST(Costs, PureMcCannFlowMatchesBuresDistance) {
  const FlowSolution sol = sample_flow(Matrix::Zero(2, 2), example1_problem(), IntegratorGrid(2000));
  const double bures = 0.5 * bures_distance_squared(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(example1_sigma1()));
  EXPECT_NEAR(bures, 0.38688, 1e-5);
  EXPECT_NEAR(sol.j_ke, bures, 1e-4);
  EXPECT_NEAR(SpdMatrix(example1_sigma1()).sqrt().trace(), 2.61313, 1e-5);
}

TEST(Costs, AttentionWeightCrossComparison) {
  const IntegratorGrid grid(400);
  const FlowSolution strong = solve_shooting(example2_problem(1.0), grid);
  const FlowSolution weak = solve_shooting(example2_problem(0.1), grid);
  ASSERT_TRUE(strong.converged);
  ASSERT_TRUE(weak.converged);
  EXPECT_LE(strong.j_ke + strong.j_a, weak.j_ke + weak.j_a + 1e-6);
  EXPECT_LE(weak.j_ke, strong.j_ke + 1e-6);
}

TEST(SimulateEnsemble, ZeroGainKeepsCovariance) {
  const FlowSolution sol = solve_shooting(trivial_problem(), IntegratorGrid(64));
  const EnsembleReport report = simulate_ensemble(sol, SpdMatrix(Matrix::Identity(2, 2)),
                                                  TracerPath::endpoints_only(column(1, 0), column(1, 0)), 100000, 3);
  ASSERT_EQ(report.checkpoints.size(), 5u);
  EXPECT_LE(report.max_relative_error(), 0.02);
  EXPECT_EQ(report.tracer_endpoint_error, 0.0);
  EXPECT_TRUE(std::isnan(report.tracer_path_error));
}

TEST(SimulateEnsemble, ReproducibleAndSeedSensitive) {
  const FlowSolution sol = sample_flow(Matrix::Zero(2, 2), example1_problem(), IntegratorGrid(200));
  const SpdMatrix sigma0(Matrix::Identity(2, 2));
  const TracerPath tracers = TracerPath::endpoints_only(column(-1, 0), sol.phi.back() * column(-1, 0));
  const EnsembleReport a = simulate_ensemble(sol, sigma0, tracers, 2000, 7);
  const EnsembleReport b = simulate_ensemble(sol, sigma0, tracers, 2000, 7);
  const EnsembleReport c = simulate_ensemble(sol, sigma0, tracers, 2000, 8);
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    EXPECT_EQ(a.checkpoints[i].empirical, b.checkpoints[i].empirical);
    EXPECT_NE(a.checkpoints[i].empirical, c.checkpoints[i].empirical);
  }
  EXPECT_LE(a.tracer_endpoint_error, 1e-6);
}

TEST(SimulateEnsemble, TracerFollowsTrajectory) {
  const Problem problem = example2_problem(1.0);
  const FlowSolution sol = sample_flow(Matrix::Zero(2, 2), problem, IntegratorGrid(400));
  const TracerPath& tracers = std::get<P2Problem>(problem).tracers;
  const EnsembleReport report = simulate_ensemble(sol, SpdMatrix(Matrix::Identity(2, 2)), tracers, 100, 1);
  EXPECT_LE(report.tracer_path_error, 1e-6);
  EXPECT_GE(report.max_relative_error(), 0.0);
}

TEST(SimulateEnsemble, RequiresParticles) {
  const FlowSolution sol = constant_gain(Matrix::Zero(2, 2), 16);
  EXPECT_THROW(simulate_ensemble(sol, SpdMatrix(Matrix::Identity(2, 2)),
                                 TracerPath::endpoints_only(column(1, 0), column(1, 0)), 99, 1),
               std::invalid_argument);
}

TEST(Perturbation, ZeroMagnitudeChangesNothing) {
  const Problem problem = trivial_problem();
  const FlowSolution sol = solve_shooting(problem, IntegratorGrid(64));
  PerturbationOptions opts;
  opts.magnitudes = {0.0};
  opts.trials = 2;
  const PerturbationReport report = perturbation_optimality_check(sol, problem, opts);
  for (const auto& trial : report.trials) {
    EXPECT_LE(std::abs(trial.delta_cost_plus), 1e-14);
    EXPECT_LE(std::abs(trial.delta_cost_minus), 1e-14);
  }
}

TEST(Perturbation, ConvergedSolutionIsLocallyOptimal) {
  const Problem problem = example1_problem();
  const IntegratorGrid grid(400);
  const FlowSolution sol = solve_shooting(problem, grid);
  ASSERT_TRUE(sol.converged);
  PerturbationOptions opts;
  opts.trials = 8;
  const PerturbationReport report = perturbation_optimality_check(sol, problem, opts);
  EXPECT_TRUE(report.locally_optimal);
  EXPECT_GE(report.min_delta_cost, -1e-8);
  EXPECT_LT(report.first_order_ratio, 1e-2);
  EXPECT_GT(report.median_curvature, 0.0);
  EXPECT_LE(report.max_terminal_residual, 1e-9);
}

TEST(Perturbation, CorruptedCostateIsFlagged) {
  const Problem problem = example1_problem();
  const IntegratorGrid grid(400);
  const FlowSolution sol = solve_shooting(problem, grid);
  ASSERT_TRUE(sol.converged);
  const FlowSolution corrupted = sample_flow(Matrix(2.0 * sol.p0), problem, grid);
  PerturbationOptions opts;
  opts.trials = 8;
  const PerturbationReport report = perturbation_optimality_check(corrupted, problem, opts);
  EXPECT_FALSE(report.locally_optimal);
  EXPECT_LT(report.min_delta_cost, -1e-6);
}

TEST(TranscriptionOracle, TrivialProblem) {
  OracleOptions opts;
  opts.steps = 64;
  const OracleResult result = transcription_oracle(trivial_problem(), opts);
  EXPECT_TRUE(result.feasible);
  EXPECT_LE(result.cost, 1e-12);
}

TEST(TranscriptionOracle, RejectsUnevenIntervals) {
  OracleOptions opts;
  opts.intervals = 5;
  opts.steps = 64;
  EXPECT_THROW(transcription_oracle(trivial_problem(), opts), std::invalid_argument);
}
