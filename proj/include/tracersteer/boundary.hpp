#pragma once

#include <vector>

#include "tracersteer/matops.hpp"

namespace tracersteer {

/// Terminal set S = {Phi : Phi Sigma0 Phi^T = Sigma1, Phi Y0 = Y1}.
class TerminalSurface {
 public:
  TerminalSurface(SpdMatrix sigma0, SpdMatrix sigma1, Matrix y0, Matrix y1);

  const SpdMatrix& sigma0() const { return sigma0_; }
  const SpdMatrix& sigma1() const { return sigma1_; }
  const Matrix& y0() const { return y0_; }
  const Matrix& y1() const { return y1_; }
  Eigen::Index n() const { return sigma0_.size(); }
  Eigen::Index m() const { return y0_.cols(); }

  /// Length of surface_residual: n(n+1)/2 + n m.
  Eigen::Index residual_size() const { return n() * (n() + 1) / 2 + n() * m(); }

 private:
  SpdMatrix sigma0_;
  SpdMatrix sigma1_;
  Matrix y0_;
  Matrix y1_;
};

/// ||Y0^T Sigma0^{-1} Y0 - Y1^T Sigma1^{-1} Y1||_F. Zero is necessary for S
/// to be nonempty, since Phi = Sigma1^{1/2} U Sigma0^{-1/2} with U orthogonal.
double gram_feasibility(const TerminalSurface& surface);

/// Upper triangle of Phi Sigma0 Phi^T - Sigma1 (off-diagonals scaled by
/// sqrt(2), so the flattening is an isometry) followed by vec(Phi Y0 - Y1).
Vector surface_residual(const Matrix& phi, const TerminalSurface& surface);

/// Jacobian of surface_residual at phi with respect to vec(V) (column-major).
Matrix surface_linearization(const Matrix& phi, const TerminalSurface& surface);

/// Trace-orthonormal basis of the tangent space
/// {V : V Sigma0 Phi^T + Phi Sigma0 V^T = 0, V Y0 = 0}.
std::vector<Matrix> tangent_basis(const Matrix& phi, const TerminalSurface& surface,
                                  double rank_tol = Tolerances{}.rank);

/// Orthogonal projector (on vec space, n^2 x n^2) onto the tangent space.
/// Unlike the basis it is independent of the SVD's choice of basis, hence
/// smooth in phi.
Matrix tangent_projector(const Matrix& phi, const TerminalSurface& surface,
                         double rank_tol = Tolerances{}.rank);

/// tr(P^T V_i) for each tangent basis element.
Vector transversality_residual(const Matrix& p, const Matrix& phi,
                               const TerminalSurface& surface,
                               double rank_tol = Tolerances{}.rank);

/// All Phi1 in S when S is a discrete set (m = n - 1). Proper rotations come
/// first. Throws InfeasibleSurface on a Gram mismatch and NotDetermined when
/// S has positive dimension.
std::vector<Matrix> determined_endpoint(const TerminalSurface& surface,
                                        double rank_tol = Tolerances{}.rank);

/// U = Sigma1^{-1/2} Phi Sigma0^{1/2}; orthogonal whenever Phi Sigma0 Phi^T = Sigma1.
Matrix orthogonal_factor(const Matrix& phi, const TerminalSurface& surface);

/// Angle theta in degrees of a 2 x 2 rotation written as
/// [[cos theta, sin theta], [-sin theta, cos theta]] (clockwise positive).
double clockwise_rotation_deg(const Matrix& rotation);

/// Rotation matrix of the same convention.
Matrix clockwise_rotation(double theta_rad);

}  // namespace tracersteer
