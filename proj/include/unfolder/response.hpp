#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "unfolder/axis.hpp"
#include "unfolder/errors.hpp"
#include "unfolder/histogram.hpp"
#include "unfolder/types.hpp"

namespace unfolder {

/// Normalization factor of the iteration: the largest column sum of A^T A.
///
/// A^T A is symmetric and non-negative, so its largest eigenvalue is bounded
/// by the maximum column sum; dividing by this value makes I - A^T A / K
/// non-expansive. For a convolution on a padded uniform grid it equals one.
template <typename Derived>
typename Derived::Scalar compute_k(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if ((a.array() < Scalar(0)).any())
    throw ConstructionError("response matrix entries must be non-negative");
  // colsum_j(A^T A) = sum_k A(k,j) * rowsum_k(A)
  const Vector<Scalar> row_sums = a.rowwise().sum();
  const Vector<Scalar> col_sums = a.transpose() * row_sums;
  const Scalar k = col_sums.size() > 0 ? col_sums.maxCoeff() : Scalar(0);
  if (!(k > Scalar(0))) throw DegenerateOperatorError("response matrix is identically zero");
  return k;
}

/// Discretized folding operator. Entry (i, j) is the probability that an event
/// in true bin j is measured in bin i; column sums below one encode acceptance
/// loss. Immutable after construction.
template <typename Scalar>
class BasicResponseMatrix {
 public:
  static constexpr Scalar column_sum_slack = Scalar(1e-9);
  static constexpr Scalar peaked_ratio = Scalar(1e6);

  BasicResponseMatrix(BasicAxis<Scalar> true_axis, BasicAxis<Scalar> meas_axis,
                      Matrix<Scalar> matrix, std::optional<Scalar> k_override = std::nullopt)
      : true_axis_(std::move(true_axis)),
        meas_axis_(std::move(meas_axis)),
        matrix_(std::move(matrix)) {
    if (matrix_.rows() != meas_axis_.nbins() || matrix_.cols() != true_axis_.nbins())
      throw DimensionError("response matrix must be " + std::to_string(meas_axis_.nbins()) +
                           " x " + std::to_string(true_axis_.nbins()));
    if (!matrix_.allFinite()) throw ConstructionError("response matrix has non-finite entries");
    const Vector<Scalar> col_sums = matrix_.colwise().sum().transpose();
    for (Index j = 0; j < col_sums.size(); ++j) {
      if (col_sums(j) > Scalar(1) + column_sum_slack)
        throw ConstructionError("column " + std::to_string(j) + " of the response sums to " +
                                std::to_string(col_sums(j)) + " > 1");
      if (col_sums(j) == Scalar(0)) empty_columns_.push_back(j);
    }
    const Scalar k = compute_k(matrix_);
    if (k_override) {
      if (!(*k_override >= k * (Scalar(1) - Scalar(1e-12))))
        throw ConstructionError("k override must not be below the computed factor");
      k_factor_ = *k_override;
    } else {
      k_factor_ = k;
    }
    std::vector<Scalar> sorted(col_sums.data(), col_sums.data() + col_sums.size());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const Scalar median = sorted[sorted.size() / 2];
    peaked_ = k_factor_ > peaked_ratio * median;
  }

  const BasicAxis<Scalar>& true_axis() const { return true_axis_; }
  const BasicAxis<Scalar>& meas_axis() const { return meas_axis_; }
  const Matrix<Scalar>& matrix() const { return matrix_; }
  Scalar k_factor() const { return k_factor_; }
  Index nx() const { return matrix_.cols(); }
  Index ny() const { return matrix_.rows(); }

  /// True bins no event ever reaches the measurement from.
  const std::vector<Index>& empty_columns() const { return empty_columns_; }
  /// K exceeds 1e6 times the median column sum.
  bool peaked() const { return peaked_; }

  BasicResponseMatrix with_k_override(Scalar k) const {
    return BasicResponseMatrix(true_axis_, meas_axis_, matrix_, k);
  }

 private:
  BasicAxis<Scalar> true_axis_;
  BasicAxis<Scalar> meas_axis_;
  Matrix<Scalar> matrix_;
  Scalar k_factor_{};
  std::vector<Index> empty_columns_;
  bool peaked_ = false;
};

using ResponseMatrix = BasicResponseMatrix<double>;

/// Conditional response that can integrate itself over a measured interval.
template <typename K, typename Scalar>
concept IntervalKernel = requires(const K& k, Scalar y, Scalar x) {
  { k.density(y, x) } -> std::convertible_to<Scalar>;
  { k.probability(y, y, x) } -> std::convertible_to<Scalar>;
};

namespace detail {

template <typename Scalar>
Scalar checked_kernel_value(Scalar v) {
  if (!std::isfinite(v) || v < Scalar(0))
    throw InvalidKernelError("kernel returned " + std::to_string(v));
  return v;
}

template <typename Scalar>
Scalar std_normal_cdf(Scalar z) {
  return Scalar(0.5) * std::erfc(-z / std::numbers::sqrt2_v<Scalar>);
}

}  // namespace detail

/// Translation-invariant Gaussian smearing, rho(y|x) = N(y; x, sigma).
template <typename Scalar = double>
struct GaussianKernel {
  Scalar sigma;

  Scalar density(Scalar y, Scalar x) const {
    const Scalar z = (y - x) / sigma;
    return std::exp(Scalar(-0.5) * z * z) /
           (sigma * std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
  }

  Scalar probability(Scalar lo, Scalar hi, Scalar x) const {
    if (sigma == Scalar(0)) return (x >= lo && x < hi) ? Scalar(1) : Scalar(0);
    // difference of upper tails is accurate in both tails
    const Scalar a = (lo - x) / sigma;
    const Scalar b = (hi - x) / sigma;
    if (a >= Scalar(0)) return detail::std_normal_cdf(-a) - detail::std_normal_cdf(-b);
    return detail::std_normal_cdf(b) - detail::std_normal_cdf(a);
  }
};

/// Calorimeter energy response with relative resolution
/// sigma(E)/E = sqrt(a^2/E + b^2). Negative measured energies are not
/// recorded, so probability below zero is lost.
template <typename Scalar = double>
struct CalorimeterKernel {
  Scalar stochastic;
  Scalar constant;

  Scalar sigma(Scalar x) const {
    return std::sqrt(stochastic * stochastic * std::max(x, Scalar(0)) +
                     constant * constant * x * x);
  }

  Scalar density(Scalar y, Scalar x) const {
    if (y < Scalar(0)) return Scalar(0);
    return GaussianKernel<Scalar>{sigma(x)}.density(y, x);
  }

  Scalar probability(Scalar lo, Scalar hi, Scalar x) const {
    lo = std::max(lo, Scalar(0));
    if (!(hi > lo)) return Scalar(0);
    return GaussianKernel<Scalar>{sigma(x)}.probability(lo, hi, x);
  }
};

/// Discretizes an analytic response. Each true bin is sampled at
/// `quad_points` midpoint-subdivided x nodes and the rows are averaged.
/// Kernels that know their interval probability are integrated exactly over
/// each measured bin; plain densities use `quad_points`-node midpoint
/// quadrature in y.
template <typename Scalar, typename Kernel>
BasicResponseMatrix<Scalar> from_kernel(const Kernel& kernel, const BasicAxis<Scalar>& true_axis,
                                        const BasicAxis<Scalar>& meas_axis,
                                        Index quad_points = 8) {
  if (quad_points < 1) throw ConstructionError("quad_points must be >= 1");
  const Index nx = true_axis.nbins();
  const Index ny = meas_axis.nbins();
  const Scalar inv_q = Scalar(1) / Scalar(quad_points);
  Matrix<Scalar> a = Matrix<Scalar>::Zero(ny, nx);
  for (Index j = 0; j < nx; ++j) {
    for (Index p = 0; p < quad_points; ++p) {
      const Scalar x = true_axis.lower(j) + true_axis.volume(j) * (Scalar(p) + Scalar(0.5)) * inv_q;
      for (Index i = 0; i < ny; ++i) {
        Scalar integral = Scalar(0);
        if constexpr (IntervalKernel<Kernel, Scalar>) {
          integral = detail::checked_kernel_value<Scalar>(
              kernel.probability(meas_axis.lower(i), meas_axis.upper(i), x));
        } else {
          const Scalar h = meas_axis.volume(i) * inv_q;
          for (Index r = 0; r < quad_points; ++r) {
            const Scalar y = meas_axis.lower(i) + h * (Scalar(r) + Scalar(0.5));
            integral += detail::checked_kernel_value<Scalar>(kernel(y, x)) * h;
          }
        }
        a(i, j) += integral * inv_q;
      }
    }
  }
  return BasicResponseMatrix<Scalar>(true_axis, meas_axis, std::move(a));
}

/// One Monte Carlo event: true value and measured value, or none when the
/// event was not accepted.
template <typename Scalar>
struct BasicMigrationPair {
  Scalar x;
  std::optional<Scalar> y;
};

using MigrationPair = BasicMigrationPair<double>;

/// Migration matrix by counting. Events whose true value falls outside the
/// true axis are ignored; accepted-but-out-of-range and missed events count in
/// the denominator only.
template <typename Scalar>
BasicResponseMatrix<Scalar> from_pairs(const std::vector<BasicMigrationPair<Scalar>>& pairs,
                                       const BasicAxis<Scalar>& true_axis,
                                       const BasicAxis<Scalar>& meas_axis) {
  if (pairs.empty()) throw ConstructionError("cannot build a response from an empty pair list");
  Matrix<Scalar> hits = Matrix<Scalar>::Zero(meas_axis.nbins(), true_axis.nbins());
  Vector<Scalar> totals = Vector<Scalar>::Zero(true_axis.nbins());
  for (const auto& p : pairs) {
    const auto j = true_axis.find(p.x);
    if (!j) continue;
    totals(*j) += Scalar(1);
    if (!p.y) continue;
    if (const auto i = meas_axis.find(*p.y)) hits(*i, *j) += Scalar(1);
  }
  for (Index j = 0; j < hits.cols(); ++j)
    if (totals(j) > Scalar(0)) hits.col(j) /= totals(j);
  return BasicResponseMatrix<Scalar>(true_axis, meas_axis, std::move(hits));
}

/// A f. Errors follow through the full covariance, or diag(stat_err^2) when
/// none is attached; systematic shifts are folded linearly.
template <typename Scalar>
BasicHistogram<Scalar> fold(const BasicResponseMatrix<Scalar>& r, const BasicHistogram<Scalar>& f) {
  if (!(f.axis() == r.true_axis()))
    throw DimensionError("histogram axis does not match the response true axis");
  const Matrix<Scalar>& a = r.matrix();
  Vector<Scalar> contents = a * f.contents();
  std::optional<Matrix<Scalar>> cov;
  Vector<Scalar> err;
  if (f.has_full_covariance()) {
    cov = a * f.covariance() * a.transpose();
    err = cov->diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
  } else {
    err = (a.array().square().matrix() * f.stat_err().array().square().matrix()).cwiseSqrt();
  }
  std::optional<Vector<Scalar>> syst;
  if (f.syst_err()) syst = a * *f.syst_err();
  return BasicHistogram<Scalar>(r.meas_axis(), std::move(contents), std::move(err),
                                std::move(syst), f.kind(), f.unfolded(), std::move(cov));
}

template <typename Scalar, typename Derived>
Vector<Scalar> transpose_apply(const BasicResponseMatrix<Scalar>& r,
                               const Eigen::MatrixBase<Derived>& g) {
  if (g.rows() != r.ny())
    throw DimensionError("vector length " + std::to_string(g.rows()) +
                         " does not match the measured axis (" + std::to_string(r.ny()) + ")");
  return r.matrix().transpose() * g;
}

}  // namespace unfolder
