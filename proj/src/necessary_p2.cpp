#include "tracersteer/necessary_p2.hpp"

#include <string>

namespace tracersteer {

P2State operator+(const P2State& a, const P2State& b) {
  return {a.phi + b.phi, a.p + b.p, a.nmat + b.nmat};
}

P2State operator*(double s, const P2State& a) { return {s * a.phi, s * a.p, s * a.nmat}; }

EpsilonWeight::EpsilonWeight(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("attention weight must be positive, got " +
                                std::to_string(epsilon));
  }
}

Matrix projector_m(const Matrix& y, const Matrix& y_dot) {
  require_full_column_rank(y, "projector_m");
  if (y.cols() == 0) return Matrix::Zero(y.rows(), y.rows());
  const Matrix gram = y.transpose() * y;
  return y_dot * gram.ldlt().solve(y.transpose());
}

Matrix initial_nullspace(const Matrix& y0) {
  require_full_column_rank(y0, "initial_nullspace");
  Matrix basis = nullspace_basis(y0.transpose(), Tolerances{}.rank);
  if (basis.cols() != y0.rows() - y0.cols()) {
    throw Error(ErrorKind::rank_deficient_tracer, "initial tracer matrix has deficient rank");
  }
  return basis.transpose();
}

namespace {

Matrix blend(const Matrix& phi, const SpdMatrix& sigma0, EpsilonWeight eps) {
  Matrix b = phi * sigma0.matrix() * phi.transpose();
  b.diagonal().array() += eps.value();
  return b;
}

}  // namespace

Matrix feedback_r(const Matrix& phi, const Matrix& p, const Matrix& nmat, const Matrix& m_proj,
                  const SpdMatrix& sigma0, EpsilonWeight eps) {
  const Eigen::Index n = phi.rows();
  if (nmat.rows() == 0) return Matrix::Zero(n, 0);
  const Matrix b = blend(phi, sigma0, eps);
  const Matrix inner = nmat * b * nmat.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(inner);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 1e-14 * hi)) {
    throw Error(ErrorKind::singular_inner_matrix,
                "N B N^T is numerically singular (eigenvalues " + std::to_string(lo) + ", " +
                    std::to_string(hi) + ")");
  }
  const Matrix rhs = (m_proj * b + p * phi.transpose()) * nmat.transpose();
  // R (N B N^T) = -rhs, solved through the symmetric inner matrix.
  return -rhs * eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix r_stationarity(const Matrix& phi, const Matrix& p, const Matrix& nmat,
                      const Matrix& m_proj, const Matrix& r, const SpdMatrix& sigma0,
                      EpsilonWeight eps) {
  const Matrix b = blend(phi, sigma0, eps);
  return (m_proj + r * nmat) * b * nmat.transpose() + p * phi.transpose() * nmat.transpose();
}

P2Eval evaluate_p2(double t, const P2State& state, const TracerPath& tracers,
                   const SpdMatrix& sigma0, EpsilonWeight eps) {
  const TracerSample sample = tracers.evaluate(t);
  Matrix m_proj = projector_m(sample.y, sample.y_dot);
  Matrix r = feedback_r(state.phi, state.p, state.nmat, m_proj, sigma0, eps);
  Matrix gain = m_proj + r * state.nmat;
  const Matrix flow = gain * state.phi;
  P2State derivative{flow, -gain.transpose() * (flow * sigma0.matrix() + state.p),
                     -state.nmat * m_proj};
  return {std::move(derivative), std::move(gain), std::move(r), std::move(m_proj)};
}

P2State p2_vector_field(double t, const P2State& state, const TracerPath& tracers,
                        const SpdMatrix& sigma0, EpsilonWeight eps) {
  return evaluate_p2(t, state, tracers, sigma0, eps).derivative;
}

}  // namespace tracersteer
