#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "unfolder/errors.hpp"
#include "unfolder/histogram.hpp"
#include "unfolder/response.hpp"
#include "unfolder/types.hpp"

namespace unfolder {

/// f_N and E_N of the iteration together with the cached quantities shared
/// by every step: f_0 = A^T g / K, E_0 = A^T E / K and M = A^T A / K.
/// The covariance of f_N is E_N E_N^T.
template <typename Scalar>
struct BasicIterateState {
  Index n = 0;
  Vector<Scalar> f;
  Matrix<Scalar> e;
  Vector<Scalar> f0;
  std::shared_ptr<const Matrix<Scalar>> e0;
  std::shared_ptr<const Matrix<Scalar>> m0;
  /// A^T dg / K when a systematic shift was supplied.
  std::optional<Vector<Scalar>> syst_seed;

  bool propagates_covariance() const { return e.cols() > 0; }
  Matrix<Scalar> covariance() const { return e * e.transpose(); }
};

using IterateState = BasicIterateState<double>;

enum class Propagation { full, none };

/// Square root E with C = E E^T. Cholesky first; a symmetric eigendecomposition
/// handles matrices that are only positive semidefinite.
template <typename Scalar>
Matrix<Scalar> covariance_sqrt(const Matrix<Scalar>& c) {
  if (c.rows() != c.cols()) throw DimensionError("covariance must be square");
  if (!c.allFinite()) throw DecompositionError("covariance has non-finite entries");
  const Scalar scale = c.cwiseAbs().maxCoeff();
  if (scale == Scalar(0)) return Matrix<Scalar>::Zero(c.rows(), c.cols());
  if (!c.isApprox(c.transpose(), Scalar(1e-10)))
    throw DecompositionError("covariance is not symmetric");
  Eigen::LLT<Matrix<Scalar>> llt(c);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(c);
  if (eig.info() != Eigen::Success) throw DecompositionError("eigendecomposition failed");
  Vector<Scalar> lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -Scalar(1e-10) * scale)
    throw DecompositionError("covariance is not positive semidefinite (eigenvalue " +
                             std::to_string(lambda.minCoeff()) + ")");
  lambda = lambda.cwiseMax(Scalar(0)).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal();
}

template <typename Scalar>
BasicIterateState<Scalar> init(const BasicResponseMatrix<Scalar>& r, const BasicHistogram<Scalar>& g,
                               const std::optional<Vector<Scalar>>& delta_g = std::nullopt,
                               Propagation propagation = Propagation::full) {
  if (!(g.axis() == r.meas_axis()))
    throw DimensionError("measured histogram axis does not match the response measured axis");
  const Scalar inv_k = Scalar(1) / r.k_factor();
  const Matrix<Scalar>& a = r.matrix();

  BasicIterateState<Scalar> s;
  s.f0 = inv_k * transpose_apply(r, g.contents());
  s.f = s.f0;
  s.m0 = std::make_shared<const Matrix<Scalar>>(inv_k * (a.transpose() * a));
  if (propagation == Propagation::full) {
    Matrix<Scalar> e0;
    if (g.has_full_covariance()) {
      e0 = inv_k * (a.transpose() * covariance_sqrt(g.covariance()));
    } else {
      e0 = inv_k * (a.transpose() * g.stat_err().asDiagonal());
    }
    s.e = e0;
    s.e0 = std::make_shared<const Matrix<Scalar>>(std::move(e0));
  }
  if (delta_g) s.syst_seed = inv_k * transpose_apply(r, *delta_g);
  if (!s.f0.allFinite() || (s.e0 && !s.e0->allFinite()))
    throw NumericalFailure(0, "first iterate is not finite");
  return s;
}

/// f_{N+1} = f_N + (f_0 - M f_N) and E_{N+1} = E_N + (E_0 - M E_N).
template <typename Scalar>
BasicIterateState<Scalar> step(BasicIterateState<Scalar> s) {
  const Matrix<Scalar>& m = *s.m0;
  s.f += s.f0 - m * s.f;
  if (s.propagates_covariance()) {
    Matrix<Scalar> me = m * s.e;
    s.e += *s.e0 - me;
  }
  ++s.n;
  if (!s.f.allFinite() || (s.propagates_covariance() && !s.e.allFinite()))
    throw NumericalFailure(static_cast<long>(s.n),
                           "iteration produced non-finite values at order " + std::to_string(s.n));
  return s;
}

/// H_n = sum_{k=1..n} 1/k, which equals digamma(n+1) + Euler's gamma.
template <typename Scalar = double>
Scalar harmonic_number(Index n) {
  Scalar h = Scalar(0);
  for (Index k = n; k >= 1; --k) h += Scalar(1) / Scalar(k);
  return h;
}

/// Bias bound at order n for a region of volume `bin_volume`:
/// (1/sqrt(V)) * (1/(n+2)) * ||f||_2, with ||f||_2 the density L2 norm.
template <typename Scalar>
Scalar bias_bound(Index n, Scalar f_l2_norm, Scalar bin_volume) {
  return f_l2_norm / (std::sqrt(bin_volume) * Scalar(n + 2));
}

/// Same, with the unknown ||f||_2 replaced by ||f_n||_2 and one common bin volume.
template <typename Scalar>
Scalar bias_bound(const BasicIterateState<Scalar>& s, Scalar bin_volume) {
  return bias_bound(s.n, l2_norm_density(s.f, bin_volume), bin_volume);
}

/// Per-bin bias bounds on a (possibly non-uniform) true axis.
template <typename Scalar>
Vector<Scalar> bias_bounds(const BasicIterateState<Scalar>& s, const BasicAxis<Scalar>& axis) {
  const Scalar norm = l2_norm_density(s.f, axis);
  return axis.volumes().unaryExpr([&](Scalar v) { return bias_bound(s.n, norm, v); });
}

/// Systematic bound at order n: (1/sqrt(V)) * H_{n+1} * ||A^T dg / K||_2.
template <typename Scalar>
Scalar syst_bound(Index n, Scalar seed_l2_norm, Scalar bin_volume) {
  return harmonic_number<Scalar>(n + 1) * seed_l2_norm / std::sqrt(bin_volume);
}

template <typename Scalar, typename Derived>
Scalar syst_bound(const BasicIterateState<Scalar>& s, const BasicResponseMatrix<Scalar>& r,
                  const Eigen::MatrixBase<Derived>& delta_g, Scalar bin_volume) {
  const Vector<Scalar> seed = transpose_apply(r, delta_g) / r.k_factor();
  return syst_bound(s.n, l2_norm_density(seed, bin_volume), bin_volume);
}

template <typename Scalar, typename Derived>
Vector<Scalar> syst_bounds(const BasicIterateState<Scalar>& s, const BasicResponseMatrix<Scalar>& r,
                           const Eigen::MatrixBase<Derived>& delta_g) {
  const Vector<Scalar> seed = transpose_apply(r, delta_g) / r.k_factor();
  const Scalar norm = l2_norm_density(seed, r.true_axis());
  return r.true_axis().volumes().unaryExpr([&](Scalar v) { return syst_bound(s.n, norm, v); });
}

template <typename Scalar>
struct BasicStatSummary {
  Vector<Scalar> per_bin;
  Scalar integral;
  /// integral / sum |f_n|
  Scalar fraction;
};

using StatSummary = BasicStatSummary<double>;

template <typename Scalar>
BasicStatSummary<Scalar> stat_summary(const BasicIterateState<Scalar>& s) {
  BasicStatSummary<Scalar> out;
  if (s.propagates_covariance()) {
    out.per_bin = s.e.rowwise().norm();
  } else {
    out.per_bin = Vector<Scalar>::Zero(s.f.size());
  }
  out.integral = out.per_bin.sum();
  const Scalar mass = s.f.template lpNorm<1>();
  if (mass > Scalar(0)) {
    out.fraction = out.integral / mass;
  } else {
    out.fraction = out.integral > Scalar(0) ? std::numeric_limits<Scalar>::infinity() : Scalar(0);
  }
  return out;
}

/// Error terms at one iteration order. Bias and systematic bounds are per-bin
/// averages of the density (worst bin when the binning is non-uniform); the
/// statistical integral is in the units of the histogram contents.
template <typename Scalar>
struct BasicErrorBudget {
  Index n = 0;
  Scalar bias_bound{};
  Scalar stat_integral{};
  Scalar stat_fraction{};
  Scalar syst_bound{};
  /// sum_j V_j (bias_j + syst_j) + stat_integral
  Scalar total{};
};

using ErrorBudget = BasicErrorBudget<double>;

struct StoppingPolicy {
  enum class Rule { fixed, stat_fraction, min_total };

  static constexpr Index default_max_iterations = 10000;
  /// Iterations without improvement that confirm a minimum of the total.
  static constexpr Index min_total_patience = 10;

  Rule rule = Rule::fixed;
  Index order = 0;
  double threshold = 0.0;
  Index max_iterations = default_max_iterations;

  static StoppingPolicy fixed(Index n, Index cap = default_max_iterations) {
    if (n < 0) throw ConstructionError("fixed iteration order must be >= 0");
    return checked({Rule::fixed, n, 0.0, std::max(cap, n)});
  }
  static StoppingPolicy stat_fraction(double t, Index cap = default_max_iterations) {
    if (!(t > 0.0 && t < 1.0)) throw ConstructionError("stat fraction threshold must be in (0,1)");
    return checked({Rule::stat_fraction, 0, t, cap});
  }
  static StoppingPolicy min_total(Index cap = default_max_iterations) {
    return checked({Rule::min_total, 0, 0.0, cap});
  }

 private:
  static StoppingPolicy checked(StoppingPolicy p) {
    if (p.max_iterations < 1) throw ConstructionError("max_iterations must be >= 1");
    return p;
  }
};

template <typename Scalar>
struct BasicUnfoldResult {
  BasicHistogram<Scalar> result;
  std::vector<BasicErrorBudget<Scalar>> trace;
  Index stopped_at = 0;
  /// The policy did not fire before max_iterations.
  bool truncated = false;
};

using UnfoldResult = BasicUnfoldResult<double>;

namespace detail {

template <typename Scalar>
struct BudgetTerms {
  BasicErrorBudget<Scalar> budget;
  Vector<Scalar> stat_per_bin;
  Vector<Scalar> syst_per_bin;
};

template <typename Scalar>
BudgetTerms<Scalar> evaluate_budget(const BasicIterateState<Scalar>& s,
                                    const BasicAxis<Scalar>& true_axis) {
  BudgetTerms<Scalar> t;
  const Vector<Scalar> vol = true_axis.volumes();
  const Vector<Scalar> bias = bias_bounds(s, true_axis);
  if (s.syst_seed) {
    const Scalar norm = l2_norm_density(*s.syst_seed, true_axis);
    t.syst_per_bin = vol.unaryExpr([&](Scalar v) { return syst_bound(s.n, norm, v); });
  } else {
    t.syst_per_bin = Vector<Scalar>::Zero(vol.size());
  }
  const auto stat = stat_summary(s);
  t.stat_per_bin = stat.per_bin;
  auto& b = t.budget;
  b.n = s.n;
  b.bias_bound = bias.maxCoeff();
  b.syst_bound = t.syst_per_bin.maxCoeff();
  b.stat_integral = stat.integral;
  b.stat_fraction = stat.fraction;
  b.total = vol.dot(bias + t.syst_per_bin) + stat.integral;
  return t;
}

}  // namespace detail

template <typename Scalar>
BasicErrorBudget<Scalar> error_budget(const BasicIterateState<Scalar>& s,
                                      const BasicAxis<Scalar>& true_axis) {
  return detail::evaluate_budget(s, true_axis).budget;
}

/// Iterates until `policy` fires and returns the unfolded histogram at the
/// stopping order together with the error budget of every evaluated order.
///
/// fixed(N) stops at N; stat_fraction(t) stops at the first order whose
/// statistical fraction reaches t; min_total stops at the order minimizing the
/// total once `min_total_patience` further orders failed to improve it. When
/// the cap is hit first the result is flagged `truncated` (min_total then
/// reports its best order so far).
template <typename Scalar>
BasicUnfoldResult<Scalar> run(const BasicResponseMatrix<Scalar>& r, const BasicHistogram<Scalar>& g,
                              const StoppingPolicy& policy,
                              const std::optional<Vector<Scalar>>& delta_g = std::nullopt) {
  using Rule = StoppingPolicy::Rule;
  BasicIterateState<Scalar> s = init(r, g, delta_g);
  std::vector<BasicErrorBudget<Scalar>> trace;

  std::optional<BasicIterateState<Scalar>> best;
  detail::BudgetTerms<Scalar> best_terms;
  Index since_best = 0;
  bool truncated = false;
  detail::BudgetTerms<Scalar> terms;

  for (;;) {
    terms = detail::evaluate_budget(s, r.true_axis());
    trace.push_back(terms.budget);

    bool fired = false;
    switch (policy.rule) {
      case Rule::fixed:
        fired = s.n >= policy.order;
        break;
      case Rule::stat_fraction:
        fired = terms.budget.stat_fraction >= Scalar(policy.threshold);
        break;
      case Rule::min_total:
        if (!best || terms.budget.total < best_terms.budget.total) {
          best = s;
          best_terms = terms;
          since_best = 0;
        } else {
          fired = ++since_best >= StoppingPolicy::min_total_patience;
        }
        break;
    }
    if (!fired && s.n >= policy.max_iterations) {
      truncated = true;
      fired = true;
    }
    if (fired) break;
    s = step(std::move(s));
  }

  if (policy.rule == Rule::min_total) {
    s = std::move(*best);
    terms = std::move(best_terms);
  }

  std::optional<Vector<Scalar>> syst;
  if (s.syst_seed) syst = terms.syst_per_bin.cwiseProduct(r.true_axis().volumes());
  std::optional<Matrix<Scalar>> cov;
  if (s.propagates_covariance()) cov = s.covariance();
  BasicHistogram<Scalar> result(r.true_axis(), s.f, terms.stat_per_bin, std::move(syst), g.kind(),
                                true, std::move(cov));
  return {std::move(result), std::move(trace), s.n, truncated};
}

/// f_N only, without covariance or bookkeeping. Used for ensembles.
template <typename Scalar>
Vector<Scalar> iterate_to(const BasicResponseMatrix<Scalar>& r, const BasicHistogram<Scalar>& g,
                          Index order) {
  BasicIterateState<Scalar> s = init(r, g, std::optional<Vector<Scalar>>{}, Propagation::none);
  while (s.n < order) s = step(std::move(s));
  return s.f;
}

}  // namespace unfolder
