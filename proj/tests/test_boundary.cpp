#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tracersteer/boundary.hpp"

using namespace tracersteer;

namespace {

Matrix column(double a, double b) {
  Matrix y(2, 1);
  y << a, b;
  return y;
}

TerminalSurface example1_surface() {
  const double r2 = std::sqrt(2.0);
  Matrix s1(2, 2);
  s1 << 2, r2, r2, 2;
  return TerminalSurface(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(s1), column(-1, 0), column(0, 1));
}

TerminalSurface example2_surface() {
  return TerminalSurface(SpdMatrix(Matrix::Identity(2, 2)), SpdMatrix(Matrix(3.0 * Matrix::Identity(2, 2))),
                         column(-std::sqrt(3.0) / 2, 0.5), column(0, -std::sqrt(3.0)));
}

Matrix example1_phi1() {
  Matrix phi(2, 2);
  phi << 0, std::sqrt(2.0), -1, 1;
  return phi;
}

Matrix example2_phi1() {
  const double h = std::sqrt(3.0) / 2;
  Matrix phi(2, 2);
  phi << -h, -1.5, 1.5, -h;
  return phi;
}

Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal;
  Matrix a(rows, cols);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  return a;
}

/// Feasible data built from a known member of S.
TerminalSurface random_surface(std::mt19937_64& rng, int n, int m, Matrix& member) {
  const Matrix a = random_matrix(rng, n, n);
  const Matrix sigma0 = a * a.transpose() + Matrix::Identity(n, n);
  member = Matrix::Identity(n, n) + 0.3 * random_matrix(rng, n, n);
  const Matrix y0 = random_matrix(rng, n, m);
  return TerminalSurface(SpdMatrix(sigma0), SpdMatrix(Matrix(member * sigma0 * member.transpose())), y0,
                         member * y0);
}

}  // namespace

TEST(TerminalSurface, ValidatesShapes) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  EXPECT_THROW(TerminalSurface(id, id, Matrix::Zero(2, 2), Matrix::Zero(2, 2)), std::invalid_argument);
  EXPECT_THROW(TerminalSurface(id, id, Matrix::Zero(3, 1), Matrix::Zero(3, 1)), std::invalid_argument);
  EXPECT_EQ(example1_surface().residual_size(), 5);
}

TEST(GramFeasibility, PaperExamplesAreFeasible) {
  EXPECT_LE(gram_feasibility(example1_surface()), 1e-15);
  EXPECT_LE(gram_feasibility(example2_surface()), 1e-15);
}

TEST(GramFeasibility, ScaledTracerIsInfeasible) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  EXPECT_NEAR(gram_feasibility(TerminalSurface(id, id, column(1, 0), column(2, 0))), 3.0, 1e-15);
}

TEST(GramFeasibility, InvariantUnderTracerMixing) {
  std::mt19937_64 rng(41);
  Matrix member;
  const TerminalSurface feasible = random_surface(rng, 4, 2, member);
  const Matrix g = random_matrix(rng, 2, 2) + 2.0 * Matrix::Identity(2, 2);
  const TerminalSurface mixed(feasible.sigma0(), feasible.sigma1(), feasible.y0() * g, feasible.y1() * g);
  EXPECT_LE(gram_feasibility(mixed), 1e-10);
  const TerminalSurface broken(feasible.sigma0(), feasible.sigma1(), feasible.y0(), 1.5 * feasible.y1());
  const TerminalSurface broken_mixed(feasible.sigma0(), feasible.sigma1(), feasible.y0() * g,
                                     1.5 * feasible.y1() * g);
  EXPECT_GT(gram_feasibility(broken), 1e-3);
  EXPECT_GT(gram_feasibility(broken_mixed), 1e-3);
}

TEST(SurfaceResidual, IdentityOnTrivialSurface) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const TerminalSurface s(id, id, column(1, 2), column(1, 2));
  EXPECT_EQ(surface_residual(Matrix::Identity(2, 2), s).norm(), 0.0);
}

TEST(SurfaceResidual, PaperEndpointLiesOnSurface) {
  EXPECT_LE(surface_residual(example1_phi1(), example1_surface()).norm(), 1e-12);
  EXPECT_LE(surface_residual(example2_phi1(), example2_surface()).norm(), 1e-12);
}

TEST(SurfaceResidual, IdentityOffSurfaceLayout) {
  const Vector r = surface_residual(Matrix::Identity(2, 2), example1_surface());
  ASSERT_EQ(r.size(), 5);
  EXPECT_NEAR(r(0), -1.0, 1e-15);
  EXPECT_NEAR(r(1), -std::sqrt(2.0) * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(r(2), -1.0, 1e-15);
  EXPECT_NEAR(r(3), -1.0, 1e-15);
  EXPECT_NEAR(r(4), -1.0, 1e-15);
  // Isometric flattening: the covariance block has the Frobenius norm of I - Sigma1.
  const Matrix gap = Matrix::Identity(2, 2) - example1_surface().sigma1().matrix();
  EXPECT_NEAR(r.head(3).norm(), gap.norm(), 1e-14);
}

TEST(SurfaceLinearization, MatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  Matrix member;
  const TerminalSurface s = random_surface(rng, 3, 1, member);
  const Matrix phi = member + 0.1 * random_matrix(rng, 3, 3);
  const Matrix jac = surface_linearization(phi, s);
  const double h = 1e-6;
  for (int k = 0; k < 9; ++k) {
    Matrix dp = Matrix::Zero(3, 3);
    dp.data()[k] = h;
    const Vector fd = (surface_residual(phi + dp, s) - surface_residual(phi - dp, s)) / (2 * h);
    EXPECT_LE((fd - jac.col(k)).norm(), 1e-8);
  }
}

TEST(TangentBasis, DeterminedPlanarCase) {
  EXPECT_TRUE(tangent_basis(example1_phi1(), example1_surface()).empty());
  EXPECT_TRUE(transversality_residual(Matrix::Identity(2, 2), example1_phi1(), example1_surface()).size() == 0);
}

TEST(TangentBasis, OrthogonalGroupWithoutTracers) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const TerminalSurface s(id, id, Matrix::Zero(2, 0), Matrix::Zero(2, 0));
  const auto basis = tangent_basis(Matrix::Identity(2, 2), s);
  ASSERT_EQ(basis.size(), 1u);
  EXPECT_LE((basis[0] + basis[0].transpose()).norm(), 1e-14);
  EXPECT_NEAR(basis[0].norm(), 1.0, 1e-14);

  const Vector tr = transversality_residual(basis[0], Matrix::Identity(2, 2), s);
  ASSERT_EQ(tr.size(), 1);
  EXPECT_NEAR(tr(0), 1.0, 1e-14);
  EXPECT_EQ(transversality_residual(Matrix::Zero(2, 2), Matrix::Identity(2, 2), s).norm(), 0.0);
}

TEST(TangentBasis, DimensionsInThreeSpace) {
  std::mt19937_64 rng(23);
  Matrix member;
  const TerminalSurface one = random_surface(rng, 3, 1, member);
  const auto with_tracer = tangent_basis(member, one);
  EXPECT_EQ(with_tracer.size(), 1u);

  const TerminalSurface none(one.sigma0(), one.sigma1(), Matrix::Zero(3, 0), Matrix::Zero(3, 0));
  const auto without = tangent_basis(member, none);
  EXPECT_EQ(without.size(), 3u);

  const Matrix jac = surface_linearization(member, none);
  for (std::size_t i = 0; i < without.size(); ++i) {
    EXPECT_LE((jac * Eigen::Map<const Vector>(without[i].data(), 9)).norm(), 1e-10);
    for (std::size_t j = 0; j < without.size(); ++j) {
      EXPECT_NEAR((without[i].transpose() * without[j]).trace(), i == j ? 1.0 : 0.0, 1e-12);
    }
  }
  const Matrix jac_one = surface_linearization(member, one);
  EXPECT_LE((jac_one * Eigen::Map<const Vector>(with_tracer[0].data(), 9)).norm(), 1e-10);
}

TEST(TangentProjector, AgreesWithBasis) {
  std::mt19937_64 rng(29);
  Matrix member;
  const TerminalSurface s = random_surface(rng, 3, 0, member);
  const auto basis = tangent_basis(member, s);
  Matrix v(9, basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) v.col(i) = Eigen::Map<const Vector>(basis[i].data(), 9);
  EXPECT_LE((tangent_projector(member, s) - v * v.transpose()).norm(), 1e-10);
}

TEST(DeterminedEndpoint, ExampleOneRotation) {
  const auto candidates = determined_endpoint(example1_surface());
  ASSERT_EQ(candidates.size(), 2u);
  EXPECT_LE((candidates[0] - example1_phi1()).norm(), 1e-12);
  EXPECT_GT(candidates[0].determinant(), 0.0);
  EXPECT_LT(candidates[1].determinant(), 0.0);
  for (const Matrix& c : candidates) EXPECT_LE(surface_residual(c, example1_surface()).norm(), 1e-10);
  EXPECT_NEAR(clockwise_rotation_deg(orthogonal_factor(candidates[0], example1_surface())), 67.5, 1e-10);
}

TEST(DeterminedEndpoint, ExampleTwoRotation) {
  const auto candidates = determined_endpoint(example2_surface());
  ASSERT_FALSE(candidates.empty());
  EXPECT_LE((candidates[0] - example2_phi1()).norm(), 1e-12);
  EXPECT_NEAR(clockwise_rotation_deg(orthogonal_factor(candidates[0], example2_surface())), -120.0, 1e-10);
}

TEST(DeterminedEndpoint, TrivialSurfaceContainsIdentity) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  const auto candidates = determined_endpoint(TerminalSurface(id, id, column(1, 0), column(1, 0)));
  bool found = false;
  for (const Matrix& c : candidates) found = found || (c - Matrix::Identity(2, 2)).norm() < 1e-14;
  EXPECT_TRUE(found);
}

TEST(DeterminedEndpoint, RandomCandidatesLieOnSurface) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 3;
    Matrix member;
    const TerminalSurface s = random_surface(rng, n, n - 1, member);
    const auto candidates = determined_endpoint(s);
    ASSERT_EQ(candidates.size(), 2u);
    bool found = false;
    for (const Matrix& c : candidates) {
      EXPECT_LE(surface_residual(c, s).norm(), 1e-10 * std::max(1.0, s.sigma1().matrix().norm()));
      found = found || (c - member).norm() < 1e-8;
    }
    EXPECT_TRUE(found);
  }
}

TEST(DeterminedEndpoint, Errors) {
  const SpdMatrix id(Matrix::Identity(2, 2));
  try {
    determined_endpoint(TerminalSurface(id, id, column(1, 0), column(2, 0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::infeasible_surface);
  }
  try {
    determined_endpoint(TerminalSurface(id, id, Matrix::Zero(2, 0), Matrix::Zero(2, 0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_determined);
  }
}

TEST(ClockwiseRotation, RoundTrip) {
  for (double deg : {-170.0, -120.0, 0.0, 67.5, 179.0}) {
    EXPECT_NEAR(clockwise_rotation_deg(clockwise_rotation(deg * std::numbers::pi / 180.0)), deg, 1e-12);
  }
  const Matrix r = clockwise_rotation(std::numbers::pi / 2);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(r(1, 0), -1.0, 1e-15);
}
