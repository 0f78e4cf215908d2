#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "unfolder/errors.hpp"
#include "unfolder/types.hpp"

namespace unfolder {

/// Ordered bin boundaries of a one-dimensional histogram. Bin i covers
/// [edges[i], edges[i+1]); the last edge is exclusive as well.
template <typename Scalar>
class BasicAxis {
 public:
  BasicAxis() : BasicAxis(Vector<Scalar>::LinSpaced(2, Scalar(0), Scalar(1))) {}

  explicit BasicAxis(Vector<Scalar> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw ConstructionError("axis needs at least two edges");
    for (Index i = 0; i + 1 < edges_.size(); ++i) {
      if (!std::isfinite(edges_(i)) || !std::isfinite(edges_(i + 1)) ||
          !(edges_(i + 1) > edges_(i)))
        throw ConstructionError("axis edges must be finite and strictly increasing (at index " +
                                std::to_string(i) + ")");
    }
  }

  explicit BasicAxis(const std::vector<Scalar>& edges)
      : BasicAxis(Vector<Scalar>(Eigen::Map<const Vector<Scalar>>(
            edges.data(), static_cast<Index>(edges.size())))) {}

  static BasicAxis uniform(Scalar low, Scalar high, Index nbins) {
    if (nbins < 1) throw ConstructionError("axis needs at least one bin");
    return BasicAxis(Vector<Scalar>::LinSpaced(nbins + 1, low, high));
  }

  Index nbins() const { return edges_.size() - 1; }
  const Vector<Scalar>& edges() const { return edges_; }
  Scalar low() const { return edges_(0); }
  Scalar high() const { return edges_(edges_.size() - 1); }
  Scalar span() const { return high() - low(); }
  Scalar lower(Index i) const { return edges_(i); }
  Scalar upper(Index i) const { return edges_(i + 1); }
  Scalar volume(Index i) const { return edges_(i + 1) - edges_(i); }
  Scalar center(Index i) const { return Scalar(0.5) * (edges_(i) + edges_(i + 1)); }

  Vector<Scalar> volumes() const {
    return edges_.tail(nbins()) - edges_.head(nbins());
  }

  Scalar min_volume() const { return volumes().minCoeff(); }

  std::optional<Index> find(Scalar x) const {
    if (!(x >= low()) || !(x < high())) return std::nullopt;
    const Scalar* first = edges_.data();
    const Scalar* last = first + edges_.size();
    const auto it = std::upper_bound(first, last, x);
    return static_cast<Index>(it - first) - 1;
  }

  friend bool operator==(const BasicAxis& a, const BasicAxis& b) {
    return a.edges_.size() == b.edges_.size() && a.edges_ == b.edges_;
  }

 private:
  Vector<Scalar> edges_;
};

using Axis = BasicAxis<double>;

/// Builds the true-side axis for unfolding histogram binning and truncation
/// along with the smearing. The measured span is extended symmetrically so the
/// result spans `extension_factor` times the measured span, every measured bin
/// is split into `refine_factor` equal bins, and each padding region is tiled
/// with bins about as wide as the refined edge bin next to it. The measured
/// edges are always kept.
template <typename Scalar>
BasicAxis<Scalar> rebin_axes(const BasicAxis<Scalar>& measured, Scalar extension_factor,
                             Index refine_factor) {
  if (!(extension_factor >= Scalar(1)))
    throw ConstructionError("extension factor must be >= 1");
  if (refine_factor < 1) throw ConstructionError("refine factor must be >= 1");
  if (extension_factor == Scalar(1) && refine_factor == 1) return measured;

  const Scalar pad = (extension_factor - Scalar(1)) * measured.span() / Scalar(2);
  const auto pad_bins = [&](Scalar edge_width) -> Index {
    const Scalar fine = edge_width / Scalar(refine_factor);
    return std::max<Index>(1, static_cast<Index>(std::llround(pad / fine)));
  };

  std::vector<Scalar> edges;
  if (pad > Scalar(0)) {
    const Index n = pad_bins(measured.volume(0));
    for (Index k = 0; k < n; ++k)
      edges.push_back(measured.low() - pad + pad * Scalar(k) / Scalar(n));
  }
  for (Index i = 0; i < measured.nbins(); ++i) {
    for (Index k = 0; k < refine_factor; ++k) {
      edges.push_back(k == 0 ? measured.lower(i)
                             : measured.lower(i) + measured.volume(i) * Scalar(k) /
                                                       Scalar(refine_factor));
    }
  }
  edges.push_back(measured.high());
  if (pad > Scalar(0)) {
    const Index n = pad_bins(measured.volume(measured.nbins() - 1));
    for (Index k = 1; k < n; ++k)
      edges.push_back(measured.high() + pad * Scalar(k) / Scalar(n));
    edges.push_back(measured.high() + pad);
  }
  return BasicAxis<Scalar>(edges);
}

}  // namespace unfolder
