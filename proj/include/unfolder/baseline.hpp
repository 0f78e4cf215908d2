#pragma once

#include <cmath>
#include <limits>

#include "unfolder/histogram.hpp"
#include "unfolder/response.hpp"
#include "unfolder/types.hpp"

namespace unfolder {

/// Relative singular-value cutoff used for every rank decision below.
inline constexpr double singular_value_cutoff = 1e-12;

template <typename Scalar>
struct BasicNaiveInversion {
  BasicHistogram<Scalar> result;
  Index rank = 0;
  /// Singular values below the cutoff were dropped (minimum-norm solution).
  bool rank_deficient = false;
};

using NaiveInversion = BasicNaiveInversion<double>;

/// Unregularized least-squares solution of A f = g through the SVD
/// pseudo-inverse. Errors are propagated as A+ C A+^T.
template <typename Scalar>
BasicNaiveInversion<Scalar> naive_invert(const BasicResponseMatrix<Scalar>& r,
                                         const BasicHistogram<Scalar>& g) {
  if (!(g.axis() == r.meas_axis()))
    throw DimensionError("measured histogram axis does not match the response measured axis");
  Eigen::BDCSVD<Matrix<Scalar>> svd(r.matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector<Scalar>& sv = svd.singularValues();
  const Scalar cutoff = Scalar(singular_value_cutoff) * sv(0);
  Vector<Scalar> inv_sv = Vector<Scalar>::Zero(sv.size());
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) {
      inv_sv(i) = Scalar(1) / sv(i);
      ++rank;
    }
  }
  const Matrix<Scalar> pinv = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
  Vector<Scalar> f = pinv * g.contents();
  Matrix<Scalar> cov = pinv * g.covariance() * pinv.transpose();
  Vector<Scalar> err = cov.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
  const bool deficient = rank < std::min(r.nx(), r.ny()) || r.ny() < r.nx();
  return {BasicHistogram<Scalar>(r.true_axis(), std::move(f), std::move(err), std::nullopt,
                                 g.kind(), true, std::move(cov)),
          rank, deficient};
}

/// Orthogonal projector onto the null space of A.
template <typename Derived>
Matrix<typename Derived::Scalar> kernel_projector(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index nx = a.cols();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(a, Eigen::ComputeFullV);
  const Vector<Scalar>& sv = svd.singularValues();
  const Scalar cutoff = sv.size() > 0 ? Scalar(singular_value_cutoff) * sv(0) : Scalar(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  const auto null_basis = svd.matrixV().rightCols(nx - rank);
  return null_basis * null_basis.transpose();
}

template <typename Scalar, typename Derived>
Vector<Scalar> kernel_projection(const BasicResponseMatrix<Scalar>& r,
                                 const Eigen::MatrixBase<Derived>& f) {
  if (f.rows() != r.nx()) throw DimensionError("vector does not match the response true axis");
  return kernel_projector(r.matrix()) * f;
}

/// sigma_max / sigma_min, or +infinity when sigma_min falls below the cutoff.
template <typename Scalar>
Scalar condition_number(const BasicResponseMatrix<Scalar>& r) {
  Eigen::BDCSVD<Matrix<Scalar>> svd(r.matrix());
  const Vector<Scalar>& sv = svd.singularValues();
  const Scalar smax = sv(0);
  const Scalar smin = sv(sv.size() - 1);
  if (!(smin > Scalar(singular_value_cutoff) * smax)) return std::numeric_limits<Scalar>::infinity();
  return smax / smin;
}

/// How strongly a binned result oscillates around zero.
template <typename Scalar>
struct BasicOscillation {
  /// Fraction of adjacent bin pairs with strictly opposite signs.
  Scalar sign_change_fraction{};
  Scalar max_abs{};
};

using Oscillation = BasicOscillation<double>;

template <typename Scalar>
BasicOscillation<Scalar> oscillation(const Vector<Scalar>& v) {
  BasicOscillation<Scalar> o;
  o.max_abs = v.size() > 0 ? v.cwiseAbs().maxCoeff() : Scalar(0);
  if (v.size() < 2) return o;
  Index changes = 0;
  for (Index i = 0; i + 1 < v.size(); ++i)
    if (v(i) * v(i + 1) < Scalar(0)) ++changes;
  o.sign_change_fraction = Scalar(changes) / Scalar(v.size() - 1);
  return o;
}

}  // namespace unfolder
