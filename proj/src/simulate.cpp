#include "unfolder/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>

namespace unfolder {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

void Scenario::validate() const {
  std::visit(overloaded{
                 [](const CauchyTruth& t) {
                   if (!(t.scale > 0)) throw ConfigError("truth.scale", "cauchy scale must be > 0");
                 },
                 [](const GaussianTruth& t) {
                   if (!(t.sigma > 0)) throw ConfigError("truth.sigma", "gaussian sigma must be > 0");
                 },
                 [](const PowerLawSpectrum& t) {
                   if (!(t.exponent > 1))
                     throw ConfigError("truth.exponent", "spectrum exponent must be > 1");
                   if (!(t.scale_energy > 0))
                     throw ConfigError("truth.scale_energy", "scale energy must be > 0");
                 }},
             truth);
  std::visit(overloaded{
                 [](const GaussianConvolution& s) {
                   if (!(s.sigma >= 0)) throw ConfigError("smearing.sigma", "sigma must be >= 0");
                 },
                 [](const CalorimeterSmearing& s) {
                   if (!(s.stochastic >= 0) || !(s.constant >= 0))
                     throw ConfigError("smearing", "resolution terms must be >= 0");
                 }},
             smearing);
  if (entries < 1) throw ConfigError("entries", "entries must be >= 1");
  if (!(extension_factor >= 1)) throw ConfigError("rebin.extension", "extension must be >= 1");
  if (refine_factor < 1) throw ConfigError("rebin.refine", "refine must be >= 1");
}

Simulation generate(const Scenario& sc) {
  sc.validate();
  std::mt19937_64 rng(splitmix64(sc.seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const auto draw_truth = [&]() -> double {
    return std::visit(
        overloaded{[&](const CauchyTruth& t) {
                     return std::cauchy_distribution<double>(t.location, t.scale)(rng);
                   },
                   [&](const GaussianTruth& t) { return t.mean + t.sigma * gauss(rng); },
                   [&](const PowerLawSpectrum& t) {
                     const double u = uniform(rng);
                     return t.exponent * t.scale_energy *
                            (std::pow(1.0 - u, -1.0 / (t.exponent - 1.0)) - 1.0);
                   }},
        sc.truth);
  };
  const auto smear = [&](double x) -> std::optional<double> {
    return std::visit(
        overloaded{[&](const GaussianConvolution& s) -> std::optional<double> {
                     return x + s.sigma * gauss(rng);
                   },
                   [&](const CalorimeterSmearing& s) -> std::optional<double> {
                     const double sigma = CalorimeterKernel<double>{s.stochastic, s.constant}.sigma(x);
                     const double y = x + sigma * gauss(rng);
                     if (y < 0.0) return std::nullopt;
                     return y;
                   }},
        sc.smearing);
  };

  std::int64_t n = sc.entries;
  if (sc.poisson_entries)
    n = std::poisson_distribution<std::int64_t>(static_cast<double>(sc.entries))(rng);

  const Axis true_axis = sc.true_axis();
  Eigen::VectorX<std::int64_t> truth_counts = Eigen::VectorX<std::int64_t>::Zero(true_axis.nbins());
  Eigen::VectorX<std::int64_t> meas_counts = Eigen::VectorX<std::int64_t>::Zero(sc.meas_axis.nbins());
  Simulation sim{Histogram(true_axis, Vector<double>::Zero(true_axis.nbins()),
                           Vector<double>::Zero(true_axis.nbins())),
                 Histogram(sc.meas_axis, Vector<double>::Zero(sc.meas_axis.nbins()),
                           Vector<double>::Zero(sc.meas_axis.nbins())),
                 {},
                 {}};
  sim.pairs.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const double x = draw_truth();
    const std::optional<double> y = smear(x);
    sim.pairs.push_back({x, y});
    if (const auto j = true_axis.find(x)) {
      ++truth_counts(*j);
    } else if (x < true_axis.low()) {
      ++sim.tally.truth_underflow;
    } else {
      ++sim.tally.truth_overflow;
    }
    if (!y) {
      ++sim.tally.missed;
    } else if (const auto i = sc.meas_axis.find(*y)) {
      ++meas_counts(*i);
    } else if (*y < sc.meas_axis.low()) {
      ++sim.tally.meas_underflow;
    } else {
      ++sim.tally.meas_overflow;
    }
  }
  sim.truth = from_counts(true_axis, truth_counts);
  sim.measured = from_counts(sc.meas_axis, meas_counts);
  return sim;
}

ResponseMatrix scenario_response(const Scenario& sc, Index quad_points) {
  sc.validate();
  const Axis true_axis = sc.true_axis();
  return std::visit(
      overloaded{[&](const GaussianConvolution& s) {
                   return from_kernel(GaussianKernel<double>{s.sigma}, true_axis, sc.meas_axis,
                                      quad_points);
                 },
                 [&](const CalorimeterSmearing& s) {
                   return from_kernel(CalorimeterKernel<double>{s.stochastic, s.constant},
                                      true_axis, sc.meas_axis, quad_points);
                 }},
      sc.smearing);
}

Vector<double> truth_bin_probabilities(const Scenario& sc) {
  const auto cdf = [&](double x) {
    return std::visit(
        overloaded{[&](const CauchyTruth& t) {
                     return 0.5 + std::atan((x - t.location) / t.scale) / std::numbers::pi;
                   },
                   [&](const GaussianTruth& t) { return normal_cdf((x - t.mean) / t.sigma); },
                   [&](const PowerLawSpectrum& t) {
                     if (x <= 0.0) return 0.0;
                     return 1.0 - std::pow(1.0 + x / (t.exponent * t.scale_energy),
                                           -(t.exponent - 1.0));
                   }},
        sc.truth);
  };
  const Axis axis = sc.true_axis();
  Vector<double> p(axis.nbins());
  for (Index j = 0; j < axis.nbins(); ++j) p(j) = cdf(axis.upper(j)) - cdf(axis.lower(j));
  return p;
}

unsigned worker_count() {
  if (const char* env = std::getenv("UNFOLDER_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleStats pseudo_experiments(const Scenario& sc, Index n_experiments, const ResponseMatrix& r,
                                 const StoppingPolicy& policy, std::uint64_t seed_stride) {
  if (n_experiments < 2) throw ConstructionError("pseudo_experiments needs at least 2 experiments");
  sc.validate();

  Index order = policy.order;
  if (policy.rule != StoppingPolicy::Rule::fixed) order = run(r, generate(sc).measured, policy).stopped_at;

  Matrix<double> results(r.nx(), n_experiments);
  std::atomic<Index> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto work = [&]() {
    try {
      for (Index k = next++; k < n_experiments; k = next++) {
        Scenario copy = sc;
        copy.seed = sc.seed + static_cast<std::uint64_t>(k) * seed_stride;
        results.col(k) = iterate_to(r, generate(copy).measured, order);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = n_experiments;
    }
  };
  const unsigned n_workers =
      static_cast<unsigned>(std::min<Index>(worker_count(), n_experiments));
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);

  EnsembleStats stats;
  stats.order = order;
  stats.experiments = n_experiments;
  stats.mean = results.rowwise().mean();
  const Matrix<double> centered = results.colwise() - stats.mean;
  stats.covariance = centered * centered.transpose() / double(n_experiments - 1);
  return stats;
}

}  // namespace unfolder
