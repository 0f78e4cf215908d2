// Command-line front end: simulate, response, unfold, fold, invert, pseudo.
//
// Exit codes: 0 success, 2 usage or configuration, 3 inconsistent data,
// 4 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "unfolder/baseline.hpp"
#include "unfolder/io.hpp"
#include "unfolder/response.hpp"
#include "unfolder/simulate.hpp"
#include "unfolder/svg.hpp"
#include "unfolder/unfold.hpp"

namespace fs = std::filesystem;
using namespace unfolder;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_data = 3;
constexpr int exit_numerical = 4;

/// "low,high,nbins"
Axis parse_axis(const std::string& text, const std::string& flag) {
  std::stringstream ss(text);
  std::string lo, hi, n;
  if (!std::getline(ss, lo, ',') || !std::getline(ss, hi, ',') || !std::getline(ss, n) )
    throw ConfigError(flag, flag + " expects low,high,nbins");
  try {
    return Axis::uniform(std::stod(lo), std::stod(hi), std::stol(n));
  } catch (const std::logic_error&) {
    throw ConfigError(flag, flag + " expects low,high,nbins");
  } catch (const ConstructionError& e) {
    throw ConfigError(flag, e.what());
  }
}

std::pair<double, Index> parse_rebin(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("--rebin", "--rebin expects extension,refine");
  try {
    return {std::stod(text.substr(0, comma)), std::stol(text.substr(comma + 1))};
  } catch (const std::logic_error&) {
    throw ConfigError("--rebin", "--rebin expects extension,refine");
  }
}

Histogram load_histogram(const std::string& path) {
  return io::histogram_from_json(io::read_json_file(path));
}

struct SimulateArgs {
  std::string config;
  std::string out = ".";
};

int cmd_simulate(const SimulateArgs& a) {
  const Scenario sc = io::scenario_from_json(io::read_json_file(a.config));
  const Simulation sim = generate(sc);
  fs::create_directories(a.out);
  io::write_json_file(fs::path(a.out) / "truth.json", io::to_json(sim.truth));
  io::write_json_file(fs::path(a.out) / "measured.json", io::to_json(sim.measured));
  std::ostringstream pairs;
  io::write_pairs_csv(pairs, sim.pairs);
  io::write_text_file(fs::path(a.out) / "pairs.csv", pairs.str());
  const auto& t = sim.tally;
  std::cerr << "events: " << sim.pairs.size() << "  truth in range: " << sim.truth.total()
            << "  measured in range: " << sim.measured.total() << "\n"
            << "truth under/overflow: " << t.truth_underflow << '/' << t.truth_overflow
            << "  measured under/overflow: " << t.meas_underflow << '/' << t.meas_overflow
            << "  missed: " << t.missed << '\n';
  return 0;
}

struct ResponseArgs {
  std::string kernel;
  double sigma = -1;
  double stochastic = CalorimeterSmearing{}.stochastic;
  double constant = CalorimeterSmearing{}.constant;
  std::string pairs;
  std::string meas_axis;
  std::string meas_from;
  std::string true_axis;
  std::string rebin;
  int quad_points = 8;
  double k_override = 0;
  std::string out;
};

int cmd_response(const ResponseArgs& a) {
  if (a.kernel.empty() == a.pairs.empty())
    throw ConfigError("--kernel/--pairs", "select exactly one of --kernel or --pairs");
  if (a.meas_axis.empty() == a.meas_from.empty())
    throw ConfigError("--meas-axis", "select exactly one of --meas-axis or --meas-from");
  const Axis meas = a.meas_from.empty() ? parse_axis(a.meas_axis, "--meas-axis")
                                        : load_histogram(a.meas_from).axis();
  Axis truth = meas;
  if (!a.true_axis.empty()) {
    if (!a.rebin.empty()) throw ConfigError("--rebin", "--rebin and --true-axis are exclusive");
    truth = parse_axis(a.true_axis, "--true-axis");
  } else if (!a.rebin.empty()) {
    const auto [ext, refine] = parse_rebin(a.rebin);
    try {
      truth = rebin_axes(meas, ext, refine);
    } catch (const ConstructionError& e) {
      throw ConfigError("--rebin", e.what());
    }
  }

  std::optional<ResponseMatrix> r;
  if (!a.pairs.empty()) {
    std::ifstream in(a.pairs);
    if (!in) throw ConfigError("--pairs", "cannot open '" + a.pairs + "'");
    r = from_pairs(io::read_pairs_csv(in), truth, meas);
    if (!r->empty_columns().empty())
      std::cerr << "warning: " << r->empty_columns().size()
                << " true bins received no Monte Carlo events\n";
  } else if (a.kernel == "gauss") {
    if (!(a.sigma >= 0)) throw ConfigError("--sigma", "--kernel gauss needs --sigma >= 0");
    r = from_kernel(GaussianKernel<double>{a.sigma}, truth, meas, a.quad_points);
  } else if (a.kernel == "calorimeter") {
    r = from_kernel(CalorimeterKernel<double>{a.stochastic, a.constant}, truth, meas, a.quad_points);
  } else {
    throw ConfigError("--kernel", "unknown kernel '" + a.kernel + "' (gauss or calorimeter)");
  }
  if (a.k_override > 0) {
    try {
      r = r->with_k_override(a.k_override);
    } catch (const ConstructionError& e) {
      throw ConfigError("--k-override", e.what());
    }
  }
  if (r->peaked()) std::cerr << "warning: normalization factor is large compared to the column sums\n";
  io::write_json_file(a.out, io::to_json(*r));
  std::cerr << "k_factor = " << io::format_number(r->k_factor()) << '\n';
  return 0;
}

struct UnfoldArgs {
  std::string measured;
  std::string response;
  std::string stop;
  std::string syst;
  std::string rebin;
  std::string truth;
  std::string out;
  std::string trace;
  std::string svg;
  long max_iterations = StoppingPolicy::default_max_iterations;
  bool log_y = false;
};

int cmd_unfold(const UnfoldArgs& a) {
  const StoppingPolicy policy = io::parse_stopping_policy(a.stop, a.max_iterations);
  const Histogram g = load_histogram(a.measured);
  const ResponseMatrix r = io::response_from_json(io::read_json_file(a.response));
  if (!(g.axis() == r.meas_axis()))
    throw DimensionError("measured histogram binning differs from the response measured axis");
  if (!a.rebin.empty()) {
    const auto [ext, refine] = parse_rebin(a.rebin);
    if (!(rebin_axes(g.axis(), ext, refine) == r.true_axis()))
      throw DimensionError("response true axis is not the rebinned measured axis");
  }
  std::optional<Vector<double>> delta_g;
  if (!a.syst.empty()) {
    delta_g = io::delta_g_from_json(io::read_json_file(a.syst));
  } else if (g.syst_err()) {
    delta_g = *g.syst_err();
  }
  if (delta_g && delta_g->size() != r.ny())
    throw DimensionError("systematic shift does not match the measured axis");

  const UnfoldResult res = run(r, g, policy, delta_g);
  if (res.truncated)
    std::cerr << "warning: stopping rule did not fire within " << policy.max_iterations
              << " iterations\n";
  io::write_json_file(a.out, io::to_json(res.result));
  if (!a.trace.empty()) {
    std::ostringstream csv;
    io::write_trace_csv(csv, res.trace);
    io::write_text_file(a.trace, csv.str());
  }
  std::optional<Histogram> truth;
  if (!a.truth.empty()) truth = load_histogram(a.truth);
  if (!a.svg.empty()) {
    std::vector<svg::Series> series{svg::density_series(g, "measured", "#1f77b4"),
                                    svg::density_series(res.result, "unfolded", "#d62728")};
    if (truth) series.push_back(svg::density_series(*truth, "true", "#2ca02c"));
    svg::PlotOptions opt;
    opt.title = "unfolded at N = " + std::to_string(res.stopped_at);
    opt.log_y = a.log_y;
    io::write_text_file(a.svg, svg::render(series, opt));
  }
  const ErrorBudget& last = res.trace[static_cast<std::size_t>(res.stopped_at)];
  std::cout << "stopped_at=" << res.stopped_at << " stat_fraction=" << last.stat_fraction
            << " bias_bound=" << last.bias_bound << " syst_bound=" << last.syst_bound << '\n';
  if (truth && truth->axis() == res.result.axis() && truth->axis() == g.axis()) {
    const Histogram unfolded_view(res.result.axis(), res.result.contents(), res.result.stat_err(),
                                  std::nullopt, res.result.kind(), true);
    const Histogram truth_view(truth->axis(), truth->contents(), truth->stat_err(), std::nullopt,
                               truth->kind(), true);
    std::cout << "l1_unfolded_truth=" << l1_distance(unfolded_view, truth_view)
              << " l1_measured_truth=" << (g.contents() - truth->contents()).lpNorm<1>() << '\n';
  }
  return 0;
}

struct FoldArgs {
  std::string input;
  std::string response;
  std::string out;
};

int cmd_fold(const FoldArgs& a) {
  const Histogram f = load_histogram(a.input);
  const ResponseMatrix r = io::response_from_json(io::read_json_file(a.response));
  io::write_json_file(a.out, io::to_json(fold(r, f)));
  return 0;
}

int cmd_invert(const FoldArgs& a) {
  const Histogram g = load_histogram(a.input);
  const ResponseMatrix r = io::response_from_json(io::read_json_file(a.response));
  const NaiveInversion inv = naive_invert(r, g);
  io::write_json_file(a.out, io::to_json(inv.result));
  const auto osc = oscillation(inv.result.contents());
  std::cerr << "rank=" << inv.rank << (inv.rank_deficient ? " (rank deficient)" : "")
            << " condition_number=" << condition_number(r)
            << " sign_change_fraction=" << osc.sign_change_fraction
            << " max_abs=" << osc.max_abs << " max_measured=" << g.contents().maxCoeff() << '\n';
  return 0;
}

struct PseudoArgs {
  std::string config;
  std::string response;
  std::string stop;
  long experiments = 100;
  std::string out;
};

int cmd_pseudo(const PseudoArgs& a) {
  const Scenario sc = io::scenario_from_json(io::read_json_file(a.config));
  const ResponseMatrix r = io::response_from_json(io::read_json_file(a.response));
  if (!(sc.meas_axis == r.meas_axis()) || !(sc.true_axis() == r.true_axis()))
    throw DimensionError("scenario binning differs from the response axes");
  const StoppingPolicy policy = io::parse_stopping_policy(a.stop);
  const EnsembleStats stats = pseudo_experiments(sc, a.experiments, r, policy);
  io::Json j;
  j["order"] = stats.order;
  j["experiments"] = stats.experiments;
  io::Json mean = io::Json::array(), sd = io::Json::array();
  for (Index i = 0; i < stats.mean.size(); ++i) {
    mean.push_back(stats.mean(i));
    sd.push_back(stats.std_dev()(i));
  }
  j["mean"] = std::move(mean);
  j["std_dev"] = std::move(sd);
  io::write_json_file(a.out, j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear iterative unfolding of histogrammed distributions"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a Monte Carlo scenario");
  c_sim->add_option("config", sim.config, "Scenario JSON")->required();
  c_sim->add_option("--out", sim.out, "Output directory");

  ResponseArgs resp;
  auto* c_resp = app.add_subcommand("response", "Build a response matrix");
  c_resp->add_option("--kernel", resp.kernel, "Analytic kernel: gauss or calorimeter");
  c_resp->add_option("--sigma", resp.sigma, "Gaussian kernel width");
  c_resp->add_option("--stochastic", resp.stochastic, "Calorimeter stochastic term a");
  c_resp->add_option("--constant", resp.constant, "Calorimeter constant term b");
  c_resp->add_option("--pairs", resp.pairs, "Monte Carlo pairs CSV (x,y; MISS for lost events)");
  c_resp->add_option("--meas-axis", resp.meas_axis, "Measured axis low,high,nbins");
  c_resp->add_option("--meas-from", resp.meas_from, "Take the measured axis from a histogram JSON");
  c_resp->add_option("--true-axis", resp.true_axis, "True axis low,high,nbins (default: measured)");
  c_resp->add_option("--rebin", resp.rebin, "True axis as rebinned measured axis: extension,refine");
  c_resp->add_option("--quad-points", resp.quad_points, "Quadrature nodes per bin")->check(CLI::PositiveNumber);
  c_resp->add_option("--k-override", resp.k_override, "Normalization factor (>= computed)");
  c_resp->add_option("--out", resp.out, "Response JSON")->required();

  UnfoldArgs unf;
  auto* c_unf = app.add_subcommand("unfold", "Run the iterative unfolding");
  c_unf->add_option("--measured", unf.measured, "Measured histogram JSON")->required();
  c_unf->add_option("--response", unf.response, "Response JSON")->required();
  c_unf->add_option("--stop", unf.stop, "fixed=N | stat-frac=t | min-total")->required();
  c_unf->add_option("--syst", unf.syst, "Systematic shift JSON");
  c_unf->add_option("--rebin", unf.rebin, "Check the true axis is the rebinned measured axis");
  c_unf->add_option("--truth", unf.truth, "True histogram, for the plot and L1 report");
  c_unf->add_option("--out", unf.out, "Result histogram JSON")->required();
  c_unf->add_option("--trace", unf.trace, "Error budget CSV");
  c_unf->add_option("--svg", unf.svg, "Plot");
  c_unf->add_option("--max-iter", unf.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);
  c_unf->add_flag("--log-y", unf.log_y, "Logarithmic y axis in the plot");

  FoldArgs fld;
  auto* c_fold = app.add_subcommand("fold", "Apply the response to a true histogram");
  c_fold->add_option("--truth", fld.input, "True histogram JSON")->required();
  c_fold->add_option("--response", fld.response, "Response JSON")->required();
  c_fold->add_option("--out", fld.out, "Output histogram JSON")->required();

  FoldArgs inv;
  auto* c_inv = app.add_subcommand("invert", "Naive least-squares inversion");
  c_inv->add_option("--measured", inv.input, "Measured histogram JSON")->required();
  c_inv->add_option("--response", inv.response, "Response JSON")->required();
  c_inv->add_option("--out", inv.out, "Output histogram JSON")->required();

  PseudoArgs ps;
  auto* c_ps = app.add_subcommand("pseudo", "Pseudo-experiment ensemble statistics");
  c_ps->add_option("config", ps.config, "Scenario JSON")->required();
  c_ps->add_option("--response", ps.response, "Response JSON")->required();
  c_ps->add_option("--stop", ps.stop, "fixed=N | stat-frac=t | min-total")->required();
  c_ps->add_option("--experiments", ps.experiments, "Number of experiments")->check(CLI::Range(2L, 1000000L));
  c_ps->add_option("--out", ps.out, "Output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_resp) return cmd_response(resp);
    if (*c_unf) return cmd_unfold(unf);
    if (*c_fold) return cmd_fold(fld);
    if (*c_inv) return cmd_invert(inv);
    if (*c_ps) return cmd_pseudo(ps);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const DecompositionError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_data;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  return exit_usage;
}
