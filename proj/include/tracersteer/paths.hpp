#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tracersteer/matops.hpp"

namespace tracersteer {

// Covariance curves t -> (Sigma_t, dSigma_t/dt) and tracer curves
// t -> (Y_t, dY_t/dt) on [0, 1]. Both are immutable handles; copies share
// the underlying data and may be evaluated from several threads.

struct CovarianceSample {
  SpdMatrix sigma;
  Matrix sigma_dot;
};

enum class CovariancePathKind { mccann, sampled, endpoints_only };

class CovariancePath {
 public:
  struct Impl;

  CovariancePathKind kind() const;
  Eigen::Index dim() const;

  /// Value and derivative. Endpoint-only paths throw OutOfDomain here.
  CovarianceSample evaluate(double t) const;
  /// Value only; endpoint-only paths accept t in {0, 1}.
  SpdMatrix at(double t) const;

  const SpdMatrix& start() const;
  const SpdMatrix& end() const;

  static CovariancePath endpoints_only(const SpdMatrix& sigma0, const SpdMatrix& sigma1);

  explicit CovariancePath(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<const Impl> impl_;
};

/// Displacement (Bures) geodesic Sigma_t = A_t Sigma0 A_t^T with
/// A_t = (1 - t) I + t T and T the optimal linear map from Sigma0 to Sigma1.
CovariancePath mccann_path(const SpdMatrix& sigma0, const SpdMatrix& sigma1);

/// The optimal map T = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}.
Matrix bures_map(const SpdMatrix& sigma0, const SpdMatrix& sigma1);

/// Squared Bures-Wasserstein distance tr(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}).
double bures_distance_squared(const SpdMatrix& sigma0, const SpdMatrix& sigma1);

struct CovarianceNode {
  double t;
  SpdMatrix sigma;
};

/// C^1 entrywise cubic Hermite interpolant through the nodes, which must be
/// strictly increasing and span exactly [0, 1]. Positivity of the
/// interpolant is certified at evaluation time (InterpolantNotSpd).
CovariancePath sampled_covariance_path(const std::vector<CovarianceNode>& nodes);

struct TracerSample {
  Matrix y;
  Matrix y_dot;
};

enum class TracerPathKind { trajectory, endpoints_only };

class TracerPath {
 public:
  struct Impl;
  using Generator = std::function<TracerSample(double)>;

  TracerPathKind kind() const;
  Eigen::Index rows() const;
  Eigen::Index cols() const;

  /// Position and velocity with a full-column-rank certificate. Endpoint-only
  /// paths throw OutOfDomain here.
  TracerSample evaluate(double t) const;
  /// Position only; endpoint-only paths accept t in {0, 1}.
  Matrix at(double t) const;

  static TracerPath endpoints_only(const Matrix& y0, const Matrix& y1);
  /// Wraps a differentiable closed-form curve producing n x m samples.
  static TracerPath trajectory(Eigen::Index n, Eigen::Index m, Generator generator);

  explicit TracerPath(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<const Impl> impl_;
};

struct TracerNode {
  double t;
  Matrix y;
};

/// Entrywise cubic Hermite interpolant of tracer positions; every node and
/// every evaluation is checked for full column rank.
TracerPath sampled_tracer_path(const std::vector<TracerNode>& nodes);

/// Smallest-to-largest singular value ratio below which a tracer matrix is
/// treated as rank deficient.
inline constexpr double kTracerRankTol = 1e-10;

void require_full_column_rank(const Matrix& y, const char* context);

}  // namespace tracersteer
