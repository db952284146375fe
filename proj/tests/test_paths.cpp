#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tracersteer/boundary.hpp"
#include "tracersteer/paths.hpp"

using namespace tracersteer;

namespace {

Matrix example1_sigma1() {
  const double r2 = std::sqrt(2.0);
  Matrix s(2, 2);
  s << 2, r2, r2, 2;
  return s;
}

Matrix random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  return a * a.transpose() + 0.5 * Matrix::Identity(n, n);
}

double covariance_fd_error(const CovariancePath& path, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.01, 0.99);
  const double h = 1e-5;
  double worst = 0.0;
  double scale = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double t = uniform(rng);
    const Matrix fd = (path.at(t + h).matrix() - path.at(t - h).matrix()) / (2 * h);
    const Matrix exact = path.evaluate(t).sigma_dot;
    worst = std::max(worst, (fd - exact).norm());
    scale = std::max(scale, exact.norm());
  }
  return worst / std::max(scale, 1.0);
}

double tracer_fd_error(const TracerPath& path, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.01, 0.99);
  const double h = 1e-5;
  double worst = 0.0;
  double scale = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double t = uniform(rng);
    const Matrix fd = (path.at(t + h) - path.at(t - h)) / (2 * h);
    const Matrix exact = path.evaluate(t).y_dot;
    worst = std::max(worst, (fd - exact).norm());
    scale = std::max(scale, exact.norm());
  }
  return worst / std::max(scale, 1.0);
}

TracerPath arc_path() {
  Matrix y0(2, 1);
  y0 << 1.0, 0.5;
  return TracerPath::trajectory(2, 1, [y0](double t) {
    const double theta = 2.0 * t;
    Matrix dr(2, 2);
    dr << -std::sin(theta), std::cos(theta), -std::cos(theta), -std::sin(theta);
    return TracerSample{clockwise_rotation(theta) * y0, 2.0 * dr * y0};
  });
}

}  // namespace

TEST(McCannPath, StationaryWhenEndpointsAgree) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const CovariancePath path = mccann_path(id, id);
  EXPECT_EQ(path.kind(), CovariancePathKind::mccann);
  for (double t : {0.0, 0.3, 1.0}) {
    const CovarianceSample s = path.evaluate(t);
    EXPECT_LE((s.sigma.matrix() - Matrix::Identity(2, 2)).norm(), 1e-15);
    EXPECT_LE(s.sigma_dot.norm(), 1e-15);
  }
}

TEST(McCannPath, ExampleOneEndpointAndMidpoint) {
  const CovariancePath path = mccann_path(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(example1_sigma1()));
  EXPECT_LE((path.at(1.0).matrix() - example1_sigma1()).norm(), 1e-12 * example1_sigma1().norm());
  EXPECT_LE((path.at(0.0).matrix() - Matrix::Identity(2, 2)).norm(), 1e-12);
  Matrix expected(2, 2);
  expected << 1.40328, 0.62415, 0.62415, 1.40328;
  EXPECT_LE((path.at(0.5).matrix() - expected).cwiseAbs().maxCoeff(), 1e-4);

  // Closed form ((1 - t) I + t S^{1/2})^2 with the square-root oracle.
  const Matrix root = SpdMatrix(example1_sigma1()).sqrt();
  const Matrix a = 0.5 * Matrix::Identity(2, 2) + 0.5 * root;
  EXPECT_LE((path.at(0.5).matrix() - a * a.transpose()).norm(), 1e-14);
}

TEST(McCannPath, RandomEndpointsReproduced) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    const Matrix s0 = random_spd(rng, n);
    const Matrix s1 = random_spd(rng, n);
    const CovariancePath path = mccann_path(SpdMatrix(s0), SpdMatrix(s1));
    EXPECT_LE((path.at(0.0).matrix() - s0).norm(), 1e-12 * s0.norm());
    EXPECT_LE((path.at(1.0).matrix() - s1).norm(), 1e-12 * s1.norm());
    EXPECT_LE(covariance_fd_error(path, rng), 1e-6);
  }
}

TEST(McCannPath, BuresMapPushesForward) {
  std::mt19937_64 rng(4);
  const Matrix s0 = random_spd(rng, 3);
  const Matrix s1 = random_spd(rng, 3);
  const Matrix t = bures_map(SpdMatrix(s0), SpdMatrix(s1));
  EXPECT_LE((t * s0 * t.transpose() - s1).norm(), 1e-10 * s1.norm());
  EXPECT_LE((t - t.transpose()).norm(), 1e-10 * t.norm());
}

TEST(BuresDistance, ExampleOneValue) {
  EXPECT_NEAR(0.5 * bures_distance_squared(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(example1_sigma1())),
              0.38688, 1e-5);
}

TEST(SampledCovariancePath, ConstantNodes) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const CovariancePath path = sampled_covariance_path({{0.0, id}, {1.0, id}});
  EXPECT_EQ(path.kind(), CovariancePathKind::sampled);
  const CovarianceSample s = path.evaluate(0.37);
  EXPECT_LE((s.sigma.matrix() - Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LE(s.sigma_dot.norm(), 1e-15);
}

TEST(SampledCovariancePath, ApproximatesMcCann) {
  const CovariancePath exact = mccann_path(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(example1_sigma1()));
  std::vector<CovarianceNode> nodes;
  for (int i = 0; i <= 10; ++i) nodes.push_back({i / 10.0, exact.at(i / 10.0)});
  const CovariancePath sampled = sampled_covariance_path(nodes);
  for (int i = 0; i <= 10; ++i) {
    EXPECT_EQ(sampled.at(i / 10.0).matrix(), nodes[i].sigma.matrix());
  }
  for (int k = 0; k <= 200; ++k) {
    const double t = k / 200.0;
    EXPECT_LE((sampled.at(t).matrix() - exact.at(t).matrix()).norm(), 1e-3);
  }
  std::mt19937_64 rng(8);
  EXPECT_LE(covariance_fd_error(sampled, rng), 1e-6);
}

TEST(SampledCovariancePath, SymmetricBumpHasFlatPeak) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const SpdMatrix two(Matrix(2.0 * Matrix::Identity(2, 2)));
  const CovariancePath path = sampled_covariance_path({{0.0, id}, {0.5, two}, {1.0, id}});
  EXPECT_NEAR(path.evaluate(0.5).sigma_dot.trace(), 0.0, 1e-12);
  const double h = 1e-6;
  EXPECT_NEAR((path.at(0.5 + h).matrix().trace() - path.at(0.5 - h).matrix().trace()) / (2 * h), 0.0,
              1e-6);
}

TEST(SampledCovariancePath, RejectsBadGrids) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const auto kind_of = [](auto&& make) {
    try {
      make();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::check_failed;
  };
  EXPECT_EQ(kind_of([&] { sampled_covariance_path({{0.0, id}, {0.5, id}, {0.5, id}, {1.0, id}}); }),
            ErrorKind::non_monotone_grid);
  EXPECT_EQ(kind_of([&] { sampled_covariance_path({{0.0, id}, {0.9, id}}); }),
            ErrorKind::non_monotone_grid);
}

TEST(SampledCovariancePath, DetectsLossOfPositivity) {
  const auto node = [](double t, double dip) {
    return CovarianceNode{t, SpdMatrix(Eigen::Vector2d(1.0, dip).asDiagonal().toDenseMatrix())};
  };
  const CovariancePath path =
      sampled_covariance_path({node(0.0, 1.0), node(0.25, 0.01), node(0.5, 1.0), node(0.75, 1.0), node(1.0, 1.0)});
  ErrorKind kind = ErrorKind::check_failed;
  for (int k = 0; k <= 100 && kind == ErrorKind::check_failed; ++k) {
    try {
      path.evaluate(0.25 * k / 100.0);
    } catch (const Error& e) {
      kind = e.kind();
    }
  }
  EXPECT_EQ(kind, ErrorKind::interpolant_not_spd);
}

TEST(EndpointCovariancePath, OnlyEndpoints) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const CovariancePath path = CovariancePath::endpoints_only(id, SpdMatrix(example1_sigma1()));
  EXPECT_EQ(path.at(1.0).matrix(), example1_sigma1());
  EXPECT_THROW(path.at(0.5), Error);
  EXPECT_THROW(path.evaluate(0.0), Error);
}

TEST(SampledTracerPath, ConstantNodes) {
  Matrix y(2, 1);
  y << 1, 2;
  const TracerPath path = sampled_tracer_path({{0.0, y}, {1.0, y}});
  const TracerSample s = path.evaluate(0.6);
  EXPECT_LE((s.y - y).norm(), 1e-15);
  EXPECT_LE(s.y_dot.norm(), 1e-15);
}

TEST(SampledTracerPath, CircularArcDerivative) {
  const TracerPath exact = arc_path();
  std::vector<TracerNode> nodes;
  for (int i = 0; i <= 20; ++i) nodes.push_back({i / 20.0, exact.at(i / 20.0)});
  const TracerPath sampled = sampled_tracer_path(nodes);
  for (int k = 0; k <= 100; ++k) {
    const double t = k / 100.0;
    EXPECT_LE((sampled.evaluate(t).y_dot - exact.evaluate(t).y_dot).norm(), 1e-3);
  }
  std::mt19937_64 rng(2);
  EXPECT_LE(tracer_fd_error(sampled, rng), 1e-6);
  EXPECT_LE(tracer_fd_error(exact, rng), 1e-6);
}

TEST(SampledTracerPath, RankCheckedAtNodes) {
  Matrix y(2, 1);
  y << 1, 0;
  try {
    sampled_tracer_path({{0.0, y}, {1.0, Matrix::Zero(2, 1)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::rank_deficient_tracer);
  }
}

TEST(SampledTracerPath, SpiralNodesKeepRank) {
  Matrix y0(2, 1);
  y0 << -std::sqrt(3.0) / 2, 0.5;
  const double rho = std::sqrt(3.0);
  const double theta1 = -120.0 * std::numbers::pi / 180.0;
  std::vector<TracerNode> nodes;
  double min_norm = 1e300;
  for (int i = 0; i <= 20; ++i) {
    const double t = i / 20.0;
    nodes.push_back({t, ((1 - t) + t * rho) * clockwise_rotation(t * theta1) * y0});
    min_norm = std::min(min_norm, nodes.back().y.norm());
  }
  const TracerPath path = sampled_tracer_path(nodes);
  for (int k = 0; k <= 400; ++k) {
    const Matrix y = path.evaluate(k / 400.0).y;
    EXPECT_GE(y.norm(), 0.9 * min_norm);
  }
}

TEST(EndpointTracerPath, OnlyEndpoints) {
  Matrix y0(2, 1), y1(2, 1);
  y0 << -1, 0;
  y1 << 0, 1;
  const TracerPath path = TracerPath::endpoints_only(y0, y1);
  EXPECT_EQ(path.kind(), TracerPathKind::endpoints_only);
  EXPECT_EQ(path.at(1.0), y1);
  EXPECT_THROW(path.at(0.5), Error);
  EXPECT_THROW(path.evaluate(1.0), Error);
}
