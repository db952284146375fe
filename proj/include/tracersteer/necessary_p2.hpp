#pragma once

#include "tracersteer/matops.hpp"
#include "tracersteer/paths.hpp"

namespace tracersteer {

// Necessary conditions for steering between endpoint covariances along a
// prescribed tracer trajectory, with an attention (gain-norm) penalty.
// Admissible gains are K = M + R N where M Y = Y_dot and N Y = 0.

struct P2State {
  Matrix phi;   // state transition, n x n
  Matrix p;     // costate, n x n
  Matrix nmat;  // nullspace frame, (n - m) x n
};

P2State operator+(const P2State& a, const P2State& b);
P2State operator*(double s, const P2State& a);

/// Weight of the attention term. Must be positive; zero is reachable only
/// through unregularized(), which reproduces the ill-posed kinetic-only cost
/// for diagnostics.
class EpsilonWeight {
 public:
  explicit EpsilonWeight(double epsilon);
  static EpsilonWeight unregularized() { return EpsilonWeight(); }

  double value() const { return epsilon_; }

 private:
  EpsilonWeight() = default;
  double epsilon_ = 0.0;
};

/// M = Y_dot (Y^T Y)^{-1} Y^T.
Matrix projector_m(const Matrix& y, const Matrix& y_dot);

/// Orthonormal rows spanning the left complement of Y0: N0 Y0 = 0 and
/// [Y0, N0^T] has full rank.
Matrix initial_nullspace(const Matrix& y0);

/// R = -(M B + P Phi^T) N^T (N B N^T)^{-1} with B = Phi Sigma0 Phi^T + eps I.
Matrix feedback_r(const Matrix& phi, const Matrix& p, const Matrix& nmat, const Matrix& m_proj,
                  const SpdMatrix& sigma0, EpsilonWeight eps);

/// dH/dR = (M + R N) B N^T + P Phi^T N^T; vanishes at the optimal R.
Matrix r_stationarity(const Matrix& phi, const Matrix& p, const Matrix& nmat,
                      const Matrix& m_proj, const Matrix& r, const SpdMatrix& sigma0,
                      EpsilonWeight eps);

struct P2Eval {
  P2State derivative;
  Matrix gain;
  Matrix r;
  Matrix m_proj;
};

P2Eval evaluate_p2(double t, const P2State& state, const TracerPath& tracers,
                   const SpdMatrix& sigma0, EpsilonWeight eps);

/// (Phi_dot, P_dot, N_dot) = (K Phi, -K^T (K Phi Sigma0 + P), -N M).
P2State p2_vector_field(double t, const P2State& state, const TracerPath& tracers,
                        const SpdMatrix& sigma0, EpsilonWeight eps);

}  // namespace tracersteer
