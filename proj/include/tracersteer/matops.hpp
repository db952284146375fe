#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tracersteer/errors.hpp"

namespace tracersteer {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative thresholds used when certifying matrix structure.
struct Tolerances {
  double symmetry = 1e-12;
  double positivity = 1e-12;
  double rank = 1e-8;
};

namespace detail {

template <typename Derived>
typename Derived::Scalar structure_scale(const Eigen::MatrixBase<Derived>& a) {
  using std::max;
  return max(typename Derived::Scalar(1), a.norm());
}

}  // namespace detail

/// Symmetric positive-definite matrix. Construction certifies the invariants
/// and keeps the eigendecomposition, so roots and inverses are cheap.
template <typename Scalar>
class BasicSpdMatrix {
 public:
  using Mat = MatrixX<Scalar>;
  using Vec = VectorX<Scalar>;

  template <typename Derived>
  explicit BasicSpdMatrix(const Eigen::MatrixBase<Derived>& a, const Tolerances& tol = {}) {
    if (a.rows() != a.cols() || a.rows() == 0) {
      throw Error(ErrorKind::not_spd, "matrix is not square and non-empty");
    }
    if (!a.allFinite()) throw Error(ErrorKind::not_spd, "matrix has non-finite entries");
    const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(tol.symmetry) * detail::structure_scale(a)) {
      throw Error(ErrorKind::not_spd, "matrix is not symmetric (max asymmetry " +
                                          std::to_string(double(asym)) + ")");
    }
    data_ = Scalar(0.5) * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(data_);
    if (eig.info() != Eigen::Success) {
      throw Error(ErrorKind::not_spd, "eigendecomposition failed");
    }
    values_ = eig.eigenvalues();
    vectors_ = eig.eigenvectors();
    const Scalar lo = values_.minCoeff();
    const Scalar hi = values_.maxCoeff();
    if (!(hi > Scalar(0)) || !(lo > Scalar(tol.positivity) * hi)) {
      throw Error(ErrorKind::not_spd, "smallest eigenvalue " + std::to_string(double(lo)) +
                                          " is not positive relative to " +
                                          std::to_string(double(hi)));
    }
  }

  const Mat& matrix() const { return data_; }
  Eigen::Index size() const { return data_.rows(); }

  /// Ascending eigenvalues and the matching orthonormal eigenvectors.
  const Vec& eigenvalues() const { return values_; }
  const Mat& eigenvectors() const { return vectors_; }

  Mat inverse() const { return spectral(values_.cwiseInverse()); }
  Mat sqrt() const { return spectral(values_.cwiseSqrt()); }
  Mat inverse_sqrt() const { return spectral(values_.cwiseSqrt().cwiseInverse()); }

  Scalar condition_number() const { return values_.maxCoeff() / values_.minCoeff(); }

 private:
  Mat spectral(const Vec& f) const {
    Mat out = vectors_ * f.asDiagonal() * vectors_.transpose();
    return Scalar(0.5) * (out + out.transpose());
  }

  Mat data_;
  Vec values_;
  Mat vectors_;
};

/// Skew-symmetric matrix; stores the exact skew part of the certified input.
template <typename Scalar>
class BasicSkewMatrix {
 public:
  using Mat = MatrixX<Scalar>;

  template <typename Derived>
  explicit BasicSkewMatrix(const Eigen::MatrixBase<Derived>& a, const Tolerances& tol = {}) {
    if (a.rows() != a.cols()) throw Error(ErrorKind::not_skew, "matrix is not square");
    if (a.size() > 0) {
      const Scalar asym = (a + a.transpose()).cwiseAbs().maxCoeff();
      if (!(asym <= Scalar(tol.symmetry) * detail::structure_scale(a))) {
        throw Error(ErrorKind::not_skew,
                    "matrix is not skew (max |A + A^T| " + std::to_string(double(asym)) + ")");
      }
    }
    data_ = Scalar(0.5) * (a - a.transpose());
  }

  static BasicSkewMatrix zero(Eigen::Index n) { return BasicSkewMatrix(Mat::Zero(n, n)); }

  const Mat& matrix() const { return data_; }
  Eigen::Index size() const { return data_.rows(); }

 private:
  Mat data_;
};

using SpdMatrix = BasicSpdMatrix<double>;
using SkewMatrix = BasicSkewMatrix<double>;

/// Principal square root.
template <typename Scalar>
BasicSpdMatrix<Scalar> sqrt_spd(const BasicSpdMatrix<Scalar>& sigma) {
  return BasicSpdMatrix<Scalar>(sigma.sqrt());
}

/// Solves X*Sigma + Sigma*X = C.
///
/// Works in the eigenbasis of Sigma, where the operator is diagonal with
/// entries lambda_i + lambda_j > 0. Skew (symmetric) right-hand sides give
/// skew (symmetric) solutions up to round-off.
template <typename Scalar, typename Derived>
MatrixX<Scalar> solve_sym_lyapunov(const BasicSpdMatrix<Scalar>& sigma,
                                   const Eigen::MatrixBase<Derived>& c) {
  const Eigen::Index n = sigma.size();
  if (c.rows() != n || c.cols() != n) {
    throw std::invalid_argument("solve_sym_lyapunov: dimension mismatch");
  }
  const auto& v = sigma.eigenvectors();
  const auto& lambda = sigma.eigenvalues();
  MatrixX<Scalar> rotated = v.transpose() * c * v;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) rotated(i, j) /= lambda(i) + lambda(j);
  }
  return v * rotated * v.transpose();
}

/// Orthonormal basis (as columns) of ker(A). Singular values at or below
/// rank_tol * sigma_max count as zero. Returns a q x 0 matrix for full rank.
template <typename Derived>
MatrixX<typename Derived::Scalar> nullspace_basis(const Eigen::MatrixBase<Derived>& a,
                                                  typename Derived::Scalar rank_tol) {
  using Scalar = typename Derived::Scalar;
  if (!(rank_tol > Scalar(0))) throw std::invalid_argument("nullspace_basis: rank_tol must be > 0");
  const Eigen::Index q = a.cols();
  if (a.rows() == 0 || q == 0) return MatrixX<Scalar>::Identity(q, q);
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = rank_tol * s(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) ++rank;
  }
  return svd.matrixV().rightCols(q - rank);
}

/// Numerical rank under the same relative cutoff as nullspace_basis.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& a,
                            typename Derived::Scalar rank_tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixX<typename Derived::Scalar>> svd(a);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rank_tol * s(0)) ++rank;
  }
  return rank;
}

/// Smallest over largest singular value; 0 for an empty or zero matrix.
template <typename Derived>
typename Derived::Scalar singular_value_ratio(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(a);
  const auto& s = svd.singularValues();
  if (!(s(0) > Scalar(0))) return Scalar(0);
  return s(s.size() - 1) / s(0);
}

}  // namespace tracersteer
