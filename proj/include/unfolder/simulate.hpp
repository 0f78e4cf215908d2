#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "unfolder/axis.hpp"
#include "unfolder/histogram.hpp"
#include "unfolder/response.hpp"
#include "unfolder/unfold.hpp"

namespace unfolder {

struct CauchyTruth {
  double location = 0.0;
  double scale = 1.0;
};

struct GaussianTruth {
  double mean = 0.0;
  double sigma = 1.0;
};

/// Tsallis-type spectrum p(E) ~ (1 + E / (n T))^(-n) on E >= 0: exponential
/// at low energy, power law with exponent n at high energy. Needs n > 1.
struct PowerLawSpectrum {
  double exponent = 6.6;
  double scale_energy = 1.0;
};

using Truth = std::variant<CauchyTruth, GaussianTruth, PowerLawSpectrum>;

struct GaussianConvolution {
  double sigma = 1.0;
};

/// Relative resolution sqrt(a^2/E + b^2); defaults are a generic hadron
/// calorimeter, not a fit to any particular detector.
struct CalorimeterSmearing {
  double stochastic = 1.15;
  double constant = 0.055;
};

using Smearing = std::variant<GaussianConvolution, CalorimeterSmearing>;

struct Scenario {
  Truth truth = CauchyTruth{};
  Smearing smearing = GaussianConvolution{};
  std::int64_t entries = 5000;
  std::uint64_t seed = 1;
  Axis meas_axis = Axis::uniform(-10.0, 10.0, 100);
  double extension_factor = 1.0;
  Index refine_factor = 1;
  /// Draw the number of events from Poisson(entries) so bin counts are
  /// independent Poisson variables.
  bool poisson_entries = false;

  Axis true_axis() const { return rebin_axes(meas_axis, extension_factor, refine_factor); }
  void validate() const;
};

struct OutOfRangeTally {
  std::int64_t truth_underflow = 0;
  std::int64_t truth_overflow = 0;
  std::int64_t meas_underflow = 0;
  std::int64_t meas_overflow = 0;
  /// Events the detector did not record (negative calorimeter energy).
  std::int64_t missed = 0;
};

struct Simulation {
  Histogram truth;
  Histogram measured;
  std::vector<MigrationPair> pairs;
  OutOfRangeTally tally;
};

/// Draws the events of `sc`. Fully determined by the scenario and its seed.
Simulation generate(const Scenario& sc);

/// The matching analytic response of a scenario's smearing model.
ResponseMatrix scenario_response(const Scenario& sc, Index quad_points = 8);

/// Expected truth masses per true bin (probability content of each bin).
Vector<double> truth_bin_probabilities(const Scenario& sc);

struct EnsembleStats {
  Index order = 0;
  Index experiments = 0;
  Vector<double> mean;
  Matrix<double> covariance;

  Vector<double> std_dev() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Repeats generate + unfold with seeds seed + k * seed_stride and returns the
/// per-bin mean and covariance of f_N at one common order. A fixed policy
/// gives the order directly; other policies are run once on the nominal
/// scenario to find it. Workers are capped by UNFOLDER_THREADS; results do not
/// depend on the worker count.
EnsembleStats pseudo_experiments(const Scenario& sc, Index n_experiments, const ResponseMatrix& r,
                                 const StoppingPolicy& policy, std::uint64_t seed_stride = 1);

/// Worker count from UNFOLDER_THREADS, else hardware concurrency.
unsigned worker_count();

}  // namespace unfolder
