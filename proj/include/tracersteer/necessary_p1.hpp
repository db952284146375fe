#pragma once

#include "tracersteer/matops.hpp"
#include "tracersteer/paths.hpp"

namespace tracersteer {

// Necessary conditions for steering along a prescribed covariance curve with
// tracer endpoint data. Admissible gains are K = (Sigma_dot / 2 + Omega) Sigma^{-1}
// with Omega skew; the optimal Omega is recovered from the costate pointwise.

struct P1State {
  Matrix phi;  // state transition
  Matrix p;    // costate
};

P1State operator+(const P1State& a, const P1State& b);
P1State operator*(double s, const P1State& a);

/// Skew Omega solving Omega Sigma + Sigma Omega = A Sigma - Sigma A^T with
/// A = Phi P^T + Sigma_dot / 2.
SkewMatrix omega_from_costate(const Matrix& phi, const Matrix& p, const SpdMatrix& sigma,
                              const Matrix& sigma_dot);

/// K = (Sigma_dot / 2 + Omega) Sigma^{-1}; always satisfies K Sigma + Sigma K^T = Sigma_dot.
Matrix gain_p1(const SpdMatrix& sigma, const Matrix& sigma_dot, const SkewMatrix& omega);

/// Frobenius norm of K Sigma + Sigma K^T - Sigma_dot.
double lyapunov_residual(const Matrix& gain, const Matrix& sigma, const Matrix& sigma_dot);

struct P1Eval {
  P1State derivative;
  Matrix gain;
  SkewMatrix omega;
};

/// Full right-hand side with the intermediate gain and Omega.
P1Eval evaluate_p1(double t, const P1State& state, const CovariancePath& path);

/// (Phi_dot, P_dot) = (K Phi, -K^T P).
P1State p1_vector_field(double t, const P1State& state, const CovariancePath& path);

}  // namespace tracersteer
