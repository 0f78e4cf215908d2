#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "unfolder/histogram.hpp"
#include "unfolder/response.hpp"
#include "unfolder/simulate.hpp"
#include "unfolder/unfold.hpp"

namespace unfolder::io {

using Json = nlohmann::ordered_json;

/// Decimal with 17 significant digits, which always round-trips a double.
std::string format_number(double v);

/// Serializes with every floating-point number written by `format_number`.
std::string dump(const Json& j, int indent = 1);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_json_file(const std::filesystem::path& path, const Json& j);

Json to_json(const Axis& axis);
/// Accepts {"edges": [...]} or {"low": l, "high": h, "nbins": n}.
Axis axis_from_json(const Json& j, const std::string& field = "axis");

Json to_json(const Histogram& h);
Histogram histogram_from_json(const Json& j);

Json to_json(const ResponseMatrix& r);
ResponseMatrix response_from_json(const Json& j);

Scenario scenario_from_json(const Json& j);
Json to_json(const Scenario& sc);

/// A systematic shift: either {"delta_g": [...]} or a histogram, whose
/// syst_err (or else contents) is taken.
Vector<double> delta_g_from_json(const Json& j);

/// "fixed=N", "stat-frac=t" or "min-total".
StoppingPolicy parse_stopping_policy(std::string_view text,
                                     Index max_iterations = StoppingPolicy::default_max_iterations);

/// low_edge,high_edge,content,stat_err,syst_err per bin.
void write_histogram_csv(std::ostream& out, const Histogram& h);
/// n,bias_bound,stat_integral,stat_fraction,syst_bound,total per order.
void write_trace_csv(std::ostream& out, const std::vector<ErrorBudget>& trace);
/// x,y per event; y is MISS for events that were not recorded.
void write_pairs_csv(std::ostream& out, const std::vector<MigrationPair>& pairs);
std::vector<MigrationPair> read_pairs_csv(std::istream& in);

}  // namespace unfolder::io
