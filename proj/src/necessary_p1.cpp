#include "tracersteer/necessary_p1.hpp"

namespace tracersteer {

P1State operator+(const P1State& a, const P1State& b) { return {a.phi + b.phi, a.p + b.p}; }

P1State operator*(double s, const P1State& a) { return {s * a.phi, s * a.p}; }

SkewMatrix omega_from_costate(const Matrix& phi, const Matrix& p, const SpdMatrix& sigma,
                              const Matrix& sigma_dot) {
  const Matrix left = (phi * p.transpose() + 0.5 * sigma_dot) * sigma.matrix();
  // (Phi P^T + Sigma_dot/2) Sigma - Sigma (P Phi^T + Sigma_dot/2) is left - left^T.
  const Matrix rhs = left - left.transpose();
  return SkewMatrix(solve_sym_lyapunov(sigma, rhs));
}

Matrix gain_p1(const SpdMatrix& sigma, const Matrix& sigma_dot, const SkewMatrix& omega) {
  return (0.5 * sigma_dot + omega.matrix()) * sigma.inverse();
}

double lyapunov_residual(const Matrix& gain, const Matrix& sigma, const Matrix& sigma_dot) {
  return (gain * sigma + sigma * gain.transpose() - sigma_dot).norm();
}

P1Eval evaluate_p1(double t, const P1State& state, const CovariancePath& path) {
  const CovarianceSample sample = path.evaluate(t);
  SkewMatrix omega = omega_from_costate(state.phi, state.p, sample.sigma, sample.sigma_dot);
  Matrix gain = gain_p1(sample.sigma, sample.sigma_dot, omega);
  P1State derivative{gain * state.phi, -gain.transpose() * state.p};
  return {std::move(derivative), std::move(gain), std::move(omega)};
}

P1State p1_vector_field(double t, const P1State& state, const CovariancePath& path) {
  return evaluate_p1(t, state, path).derivative;
}

}  // namespace tracersteer
