#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "unfolder/axis.hpp"
#include "unfolder/errors.hpp"
#include "unfolder/types.hpp"

namespace unfolder {

enum class HistogramKind { counts, mass, density };

std::string_view to_string(HistogramKind kind);
HistogramKind histogram_kind_from_string(std::string_view name);

/// Binned one-dimensional distribution with per-bin statistical errors and
/// optional systematic errors. Immutable after construction.
///
/// Raw measured histograms are non-negative; negative contents are accepted
/// only when `unfolded` is set, since the linear unfolding does not preserve
/// positivity.
template <typename Scalar>
class BasicHistogram {
 public:
  BasicHistogram(BasicAxis<Scalar> axis, Vector<Scalar> contents, Vector<Scalar> stat_err,
                 std::optional<Vector<Scalar>> syst_err = std::nullopt,
                 HistogramKind kind = HistogramKind::mass, bool unfolded = false,
                 std::optional<Matrix<Scalar>> covariance = std::nullopt)
      : axis_(std::move(axis)),
        contents_(std::move(contents)),
        stat_err_(std::move(stat_err)),
        syst_err_(std::move(syst_err)),
        covariance_(std::move(covariance)),
        kind_(kind),
        unfolded_(unfolded) {
    const Index n = axis_.nbins();
    if (contents_.size() != n || stat_err_.size() != n)
      throw DimensionError("histogram vectors must have one entry per bin (" +
                           std::to_string(n) + ")");
    if (syst_err_ && syst_err_->size() != n)
      throw DimensionError("syst_err must have one entry per bin");
    if (covariance_ && (covariance_->rows() != n || covariance_->cols() != n))
      throw DimensionError("covariance must be nbins x nbins");
    if (!contents_.allFinite() || !stat_err_.allFinite())
      throw ConstructionError("histogram contents and errors must be finite");
    if ((stat_err_.array() < Scalar(0)).any())
      throw ConstructionError("stat_err must be non-negative");
    if (syst_err_ && (!syst_err_->allFinite() || (syst_err_->array() < Scalar(0)).any()))
      throw ConstructionError("syst_err must be finite and non-negative");
    if (!unfolded_ && (contents_.array() < Scalar(0)).any())
      throw ConstructionError("negative contents are only allowed on unfolded histograms");
  }

  const BasicAxis<Scalar>& axis() const { return axis_; }
  Index nbins() const { return axis_.nbins(); }
  const Vector<Scalar>& contents() const { return contents_; }
  const Vector<Scalar>& stat_err() const { return stat_err_; }
  const std::optional<Vector<Scalar>>& syst_err() const { return syst_err_; }
  HistogramKind kind() const { return kind_; }
  bool unfolded() const { return unfolded_; }

  /// Full covariance when one was attached, otherwise diag(stat_err^2).
  Matrix<Scalar> covariance() const {
    if (covariance_) return *covariance_;
    return stat_err_.array().square().matrix().asDiagonal();
  }
  bool has_full_covariance() const { return covariance_.has_value(); }

  Scalar total() const { return contents_.sum(); }

 private:
  BasicAxis<Scalar> axis_;
  Vector<Scalar> contents_;
  Vector<Scalar> stat_err_;
  std::optional<Vector<Scalar>> syst_err_;
  std::optional<Matrix<Scalar>> covariance_;
  HistogramKind kind_;
  bool unfolded_;
};

using Histogram = BasicHistogram<double>;

/// Poisson-error histogram from raw counts. Empty bins get `zero_bin_sigma`.
template <typename Scalar, typename Count>
BasicHistogram<Scalar> from_counts(const BasicAxis<Scalar>& axis,
                                   const Eigen::Matrix<Count, Eigen::Dynamic, 1>& counts,
                                   Scalar zero_bin_sigma = Scalar(0)) {
  if (counts.size() != axis.nbins())
    throw DimensionError("count vector length " + std::to_string(counts.size()) +
                         " does not match axis with " + std::to_string(axis.nbins()) + " bins");
  if ((counts.array() < Count(0)).any()) throw ConstructionError("counts must be non-negative");
  if (!(zero_bin_sigma >= Scalar(0))) throw ConstructionError("zero_bin_sigma must be >= 0");
  Vector<Scalar> contents = counts.template cast<Scalar>();
  Vector<Scalar> err = contents.unaryExpr(
      [&](Scalar c) { return c > Scalar(0) ? std::sqrt(c) : zero_bin_sigma; });
  return BasicHistogram<Scalar>(axis, std::move(contents), std::move(err), std::nullopt,
                                HistogramKind::counts);
}

/// Scales contents to unit total. Errors and covariance scale by the same factor.
template <typename Scalar>
BasicHistogram<Scalar> normalize(const BasicHistogram<Scalar>& h) {
  const Scalar total = h.total();
  if (!(total > Scalar(0)) || !std::isfinite(total))
    throw NormalizationError("cannot normalize a histogram with total " + std::to_string(total));
  const Scalar s = Scalar(1) / total;
  std::optional<Vector<Scalar>> syst;
  if (h.syst_err()) syst = *h.syst_err() * s;
  std::optional<Matrix<Scalar>> cov;
  if (h.has_full_covariance()) cov = h.covariance() * (s * s);
  return BasicHistogram<Scalar>(h.axis(), h.contents() * s, h.stat_err() * s, std::move(syst),
                                HistogramKind::mass, h.unfolded(), std::move(cov));
}

template <typename Scalar>
Scalar l1_distance(const BasicHistogram<Scalar>& a, const BasicHistogram<Scalar>& b) {
  if (!(a.axis() == b.axis())) throw DimensionError("l1_distance needs identical axes");
  return (a.contents() - b.contents()).template lpNorm<1>();
}

/// L2 norm of the density represented by per-bin masses:
/// sqrt(sum_i (m_i / v_i)^2 v_i).
template <typename Scalar>
Scalar l2_norm_density(const Vector<Scalar>& mass, const BasicAxis<Scalar>& axis) {
  if (mass.size() != axis.nbins()) throw DimensionError("mass vector does not match axis");
  return std::sqrt((mass.array().square() / axis.volumes().array()).sum());
}

/// Same with one common bin volume.
template <typename Scalar>
Scalar l2_norm_density(const Vector<Scalar>& mass, Scalar bin_volume) {
  return std::sqrt(mass.squaredNorm() / bin_volume);
}

}  // namespace unfolder
