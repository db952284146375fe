#include "tracersteer/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tracersteer/paths.hpp"

namespace tracersteer {

TerminalSurface::TerminalSurface(SpdMatrix sigma0, SpdMatrix sigma1, Matrix y0, Matrix y1)
    : sigma0_(std::move(sigma0)),
      sigma1_(std::move(sigma1)),
      y0_(std::move(y0)),
      y1_(std::move(y1)) {
  const Eigen::Index n = sigma0_.size();
  if (sigma1_.size() != n) throw std::invalid_argument("terminal surface: covariance sizes differ");
  if (y0_.rows() != n || y1_.rows() != n || y0_.cols() != y1_.cols()) {
    throw std::invalid_argument("terminal surface: tracer matrices must both be n x m");
  }
  if (y0_.cols() >= n) throw std::invalid_argument("terminal surface: need m < n tracers");
}

double gram_feasibility(const TerminalSurface& surface) {
  const Matrix g0 = surface.y0().transpose() * surface.sigma0().inverse() * surface.y0();
  const Matrix g1 = surface.y1().transpose() * surface.sigma1().inverse() * surface.y1();
  return (g0 - g1).norm();
}

namespace {

void flatten_symmetric(const Matrix& s, Vector& out, Eigen::Index& k) {
  const Eigen::Index n = s.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      out(k++) = i == j ? s(i, j) : std::numbers::sqrt2 * s(i, j);
    }
  }
}

}  // namespace

Vector surface_residual(const Matrix& phi, const TerminalSurface& surface) {
  Vector out(surface.residual_size());
  Eigen::Index k = 0;
  flatten_symmetric(phi * surface.sigma0().matrix() * phi.transpose() - surface.sigma1().matrix(),
                    out, k);
  const Matrix tracer = phi * surface.y0() - surface.y1();
  out.tail(tracer.size()) = tracer.reshaped();
  return out;
}

Matrix surface_linearization(const Matrix& phi, const TerminalSurface& surface) {
  const Eigen::Index n = surface.n();
  Matrix jac(surface.residual_size(), n * n);
  const Matrix phi_s0 = phi * surface.sigma0().matrix();
  for (Eigen::Index col = 0; col < n * n; ++col) {
    Matrix v = Matrix::Zero(n, n);
    v(col % n, col / n) = 1.0;
    const Matrix sym = v * phi_s0.transpose() + phi_s0 * v.transpose();
    Vector column(surface.residual_size());
    Eigen::Index k = 0;
    flatten_symmetric(sym, column, k);
    const Matrix tracer = v * surface.y0();
    column.tail(tracer.size()) = tracer.reshaped();
    jac.col(col) = column;
  }
  return jac;
}

std::vector<Matrix> tangent_basis(const Matrix& phi, const TerminalSurface& surface,
                                  double rank_tol) {
  const Eigen::Index n = surface.n();
  const Matrix kernel = nullspace_basis(surface_linearization(phi, surface), rank_tol);
  std::vector<Matrix> basis;
  basis.reserve(static_cast<std::size_t>(kernel.cols()));
  for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
    basis.push_back(kernel.col(j).reshaped(n, n));
  }
  return basis;
}

Matrix tangent_projector(const Matrix& phi, const TerminalSurface& surface, double rank_tol) {
  const Matrix kernel = nullspace_basis(surface_linearization(phi, surface), rank_tol);
  return kernel * kernel.transpose();
}

Vector transversality_residual(const Matrix& p, const Matrix& phi,
                               const TerminalSurface& surface, double rank_tol) {
  const auto basis = tangent_basis(phi, surface, rank_tol);
  Vector out(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = (p.transpose() * basis[i]).trace();
  }
  return out;
}

std::vector<Matrix> determined_endpoint(const TerminalSurface& surface, double rank_tol) {
  const double gram = gram_feasibility(surface);
  if (!(gram <= 1e-8)) {
    throw Error(ErrorKind::infeasible_surface,
                "tracer Gram matrices differ by " + std::to_string(gram));
  }
  const Eigen::Index n = surface.n();
  const Eigen::Index m = surface.m();
  if (m != n - 1) {
    throw Error(ErrorKind::not_determined,
                "terminal surface has dimension " + std::to_string((n - m) * (n - m - 1) / 2) +
                    "; use free-endpoint shooting");
  }
  require_full_column_rank(surface.y0(), "determined_endpoint");
  // Normalize both sides to the orthogonal problem U a = b.
  const Matrix a = surface.sigma0().inverse_sqrt() * surface.y0();
  const Matrix b = surface.sigma1().inverse_sqrt() * surface.y1();
  const Matrix a_perp = nullspace_basis(a.transpose(), rank_tol);
  const Matrix b_perp = nullspace_basis(b.transpose(), rank_tol);
  if (a_perp.cols() != 1 || b_perp.cols() != 1) {
    throw Error(ErrorKind::rank_deficient_tracer, "tracer endpoints lack full column rank");
  }
  Matrix qa(n, n);
  qa << a, a_perp;
  const Matrix qa_inv = qa.inverse();

  std::vector<Matrix> candidates;
  for (double sign : {1.0, -1.0}) {
    Matrix qb(n, n);
    qb << b, sign * b_perp;
    const Matrix u = qb * qa_inv;
    candidates.push_back(surface.sigma1().sqrt() * u * surface.sigma0().inverse_sqrt());
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Matrix& x, const Matrix& y) {
    return x.determinant() > 0.0 && y.determinant() <= 0.0;
  });
  if (!tangent_basis(candidates.front(), surface, rank_tol).empty()) {
    throw Error(ErrorKind::not_determined, "tangent space at the endpoint is nontrivial");
  }
  return candidates;
}

Matrix orthogonal_factor(const Matrix& phi, const TerminalSurface& surface) {
  return surface.sigma1().inverse_sqrt() * phi * surface.sigma0().sqrt();
}

double clockwise_rotation_deg(const Matrix& rotation) {
  if (rotation.rows() != 2 || rotation.cols() != 2) {
    throw std::invalid_argument("clockwise_rotation_deg expects a 2 x 2 matrix");
  }
  return std::atan2(rotation(0, 1), rotation(0, 0)) * 180.0 / std::numbers::pi;
}

Matrix clockwise_rotation(double theta_rad) {
  Matrix r(2, 2);
  r << std::cos(theta_rad), std::sin(theta_rad), -std::sin(theta_rad), std::cos(theta_rad);
  return r;
}

}  // namespace tracersteer
