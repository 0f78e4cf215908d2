#include "unfolder/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace unfolder::io {

namespace {

const Json& require(const Json& j, const std::string& key, const std::string& context) {
  const std::string field = context.empty() ? key : context + "." + key;
  if (!j.is_object()) throw ConfigError(context, "'" + context + "' must be an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(field, "missing field '" + field + "'");
  return *it;
}

double number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "field '" + field + "' must be a number");
  return j.get<double>();
}

std::int64_t integer(const Json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError(field, "field '" + field + "' must be an integer");
  return j.get<std::int64_t>();
}

Vector<double> vector_field(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "field '" + field + "' must be an array");
  Vector<double> v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], field);
  return v;
}

Json to_array(const Vector<double>& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void dump_into(std::string& out, const Json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(key).dump();
        out += indent < 0 ? ":" : ": ";
        dump_into(out, value, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // numeric arrays stay on one line
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      out += '[';
      bool first = true;
      for (const auto& value : j) {
        if (!first) out += flat && indent >= 0 ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        dump_into(out, value, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) throw Error("cannot serialize a non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string dump(const Json& j, int indent) {
  std::string out;
  dump_into(out, j, indent, 0);
  out += '\n';
  return out;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string(), "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, dump(j));
}

Json to_json(const Axis& axis) { return Json{{"edges", to_array(axis.edges())}}; }

Axis axis_from_json(const Json& j, const std::string& field) {
  try {
    if (j.is_object() && j.contains("edges"))
      return Axis(vector_field(j["edges"], field + ".edges"));
    const double low = number(require(j, "low", field), field + ".low");
    const double high = number(require(j, "high", field), field + ".high");
    const std::int64_t n = integer(require(j, "nbins", field), field + ".nbins");
    return Axis::uniform(low, high, static_cast<Index>(n));
  } catch (const ConstructionError& e) {
    throw ConfigError(field, field + ": " + e.what());
  }
}

Json to_json(const Histogram& h) {
  Json j;
  j["axis"] = to_json(h.axis());
  j["contents"] = to_array(h.contents());
  j["stat_err"] = to_array(h.stat_err());
  if (h.syst_err()) j["syst_err"] = to_array(*h.syst_err());
  j["kind"] = std::string(to_string(h.kind()));
  j["unfolded"] = h.unfolded();
  return j;
}

Histogram histogram_from_json(const Json& j) {
  Axis axis = axis_from_json(require(j, "axis", ""), "axis");
  Vector<double> contents = vector_field(require(j, "contents", ""), "contents");
  Vector<double> stat = j.contains("stat_err") ? vector_field(j["stat_err"], "stat_err")
                                               : Vector<double>::Zero(contents.size());
  std::optional<Vector<double>> syst;
  if (j.contains("syst_err") && !j["syst_err"].is_null())
    syst = vector_field(j["syst_err"], "syst_err");
  HistogramKind kind = HistogramKind::mass;
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) throw ConfigError("kind", "field 'kind' must be a string");
    kind = histogram_kind_from_string(j["kind"].get<std::string>());
  }
  bool unfolded = false;
  if (j.contains("unfolded")) {
    if (!j["unfolded"].is_boolean()) throw ConfigError("unfolded", "field 'unfolded' must be a bool");
    unfolded = j["unfolded"].get<bool>();
  }
  try {
    return Histogram(std::move(axis), std::move(contents), std::move(stat), std::move(syst), kind,
                     unfolded);
  } catch (const DimensionError& e) {
    throw ConfigError("contents", e.what());
  } catch (const ConstructionError& e) {
    throw ConfigError("contents", e.what());
  }
}

Json to_json(const ResponseMatrix& r) {
  Json j;
  j["true_axis"] = to_json(r.true_axis());
  j["meas_axis"] = to_json(r.meas_axis());
  Json rows = Json::array();
  for (Index i = 0; i < r.ny(); ++i) rows.push_back(to_array(r.matrix().row(i).transpose()));
  j["matrix"] = std::move(rows);
  j["k_factor"] = r.k_factor();
  return j;
}

ResponseMatrix response_from_json(const Json& j) {
  Axis true_axis = axis_from_json(require(j, "true_axis", ""), "true_axis");
  Axis meas_axis = axis_from_json(require(j, "meas_axis", ""), "meas_axis");
  const Json& rows = require(j, "matrix", "");
  if (!rows.is_array() || static_cast<Index>(rows.size()) != meas_axis.nbins())
    throw ConfigError("matrix", "matrix must have one row per measured bin");
  Matrix<double> m(meas_axis.nbins(), true_axis.nbins());
  for (Index i = 0; i < m.rows(); ++i) {
    const Vector<double> row = vector_field(rows[static_cast<std::size_t>(i)], "matrix");
    if (row.size() != m.cols()) throw ConfigError("matrix", "matrix row has the wrong length");
    m.row(i) = row.transpose();
  }
  std::optional<double> k;
  if (j.contains("k_factor")) k = number(j["k_factor"], "k_factor");
  try {
    return ResponseMatrix(std::move(true_axis), std::move(meas_axis), std::move(m), k);
  } catch (const ConstructionError& e) {
    throw ConfigError(k ? "k_factor" : "matrix", e.what());
  }
}

Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  const Json& truth = require(j, "truth", "");
  const std::string truth_type = require(truth, "type", "truth").get<std::string>();
  if (truth_type == "cauchy") {
    sc.truth = CauchyTruth{number(require(truth, "location", "truth"), "truth.location"),
                           number(require(truth, "scale", "truth"), "truth.scale")};
  } else if (truth_type == "gaussian") {
    sc.truth = GaussianTruth{number(require(truth, "mean", "truth"), "truth.mean"),
                             number(require(truth, "sigma", "truth"), "truth.sigma")};
  } else if (truth_type == "powerlaw_spectrum") {
    sc.truth = PowerLawSpectrum{number(require(truth, "exponent", "truth"), "truth.exponent"),
                                number(require(truth, "scale_energy", "truth"), "truth.scale_energy")};
  } else {
    throw ConfigError("truth.type", "unknown truth type '" + truth_type + "'");
  }

  const Json& smearing = require(j, "smearing", "");
  const std::string smear_type = require(smearing, "type", "smearing").get<std::string>();
  if (smear_type == "gaussian_convolution") {
    sc.smearing = GaussianConvolution{number(require(smearing, "sigma", "smearing"), "smearing.sigma")};
  } else if (smear_type == "calorimeter") {
    CalorimeterSmearing cal;
    if (smearing.contains("stochastic_a"))
      cal.stochastic = number(smearing["stochastic_a"], "smearing.stochastic_a");
    if (smearing.contains("constant_b"))
      cal.constant = number(smearing["constant_b"], "smearing.constant_b");
    sc.smearing = cal;
  } else {
    throw ConfigError("smearing.type", "unknown smearing type '" + smear_type + "'");
  }

  sc.entries = integer(require(j, "entries", ""), "entries");
  const Json& seed = require(j, "seed", "");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
    throw ConfigError("seed", "field 'seed' must be a non-negative integer");
  sc.seed = seed.get<std::uint64_t>();
  sc.meas_axis = axis_from_json(require(j, "meas_axis", ""), "meas_axis");
  if (j.contains("rebin")) {
    const Json& rebin = j["rebin"];
    if (rebin.contains("extension")) sc.extension_factor = number(rebin["extension"], "rebin.extension");
    if (rebin.contains("refine")) sc.refine_factor = static_cast<Index>(integer(rebin["refine"], "rebin.refine"));
  }
  if (j.contains("poisson_entries")) {
    if (!j["poisson_entries"].is_boolean())
      throw ConfigError("poisson_entries", "field 'poisson_entries' must be a bool");
    sc.poisson_entries = j["poisson_entries"].get<bool>();
  }
  sc.validate();
  return sc;
}

Json to_json(const Scenario& sc) {
  Json j;
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, CauchyTruth>) {
          j["truth"] = Json{{"type", "cauchy"}, {"location", t.location}, {"scale", t.scale}};
        } else if constexpr (std::is_same_v<T, GaussianTruth>) {
          j["truth"] = Json{{"type", "gaussian"}, {"mean", t.mean}, {"sigma", t.sigma}};
        } else {
          j["truth"] = Json{{"type", "powerlaw_spectrum"},
                            {"exponent", t.exponent},
                            {"scale_energy", t.scale_energy}};
        }
      },
      sc.truth);
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, GaussianConvolution>) {
          j["smearing"] = Json{{"type", "gaussian_convolution"}, {"sigma", s.sigma}};
        } else {
          j["smearing"] = Json{{"type", "calorimeter"},
                               {"stochastic_a", s.stochastic},
                               {"constant_b", s.constant}};
        }
      },
      sc.smearing);
  j["entries"] = sc.entries;
  j["seed"] = sc.seed;
  j["meas_axis"] = to_json(sc.meas_axis);
  j["rebin"] = Json{{"extension", sc.extension_factor}, {"refine", sc.refine_factor}};
  j["poisson_entries"] = sc.poisson_entries;
  return j;
}

Vector<double> delta_g_from_json(const Json& j) {
  if (j.is_object() && j.contains("delta_g")) return vector_field(j["delta_g"], "delta_g");
  const Histogram h = histogram_from_json(j);
  return h.syst_err() ? *h.syst_err() : h.contents();
}

StoppingPolicy parse_stopping_policy(std::string_view text, Index max_iterations) {
  const auto value = [&](std::string_view prefix) { return std::string(text.substr(prefix.size())); };
  try {
    if (text == "min-total") return StoppingPolicy::min_total(max_iterations);
    if (text.starts_with("fixed=")) {
      std::size_t pos = 0;
      const std::string v = value("fixed=");
      const long long n = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return StoppingPolicy::fixed(static_cast<Index>(n), max_iterations);
    }
    if (text.starts_with("stat-frac=")) {
      std::size_t pos = 0;
      const std::string v = value("stat-frac=");
      const double t = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return StoppingPolicy::stat_fraction(t, max_iterations);
    }
  } catch (const std::logic_error&) {
  } catch (const ConstructionError& e) {
    throw ConfigError("stop", e.what());
  }
  throw ConfigError("stop", "stopping rule must be fixed=N, stat-frac=t or min-total, got '" +
                                std::string(text) + "'");
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "low_edge,high_edge,content,stat_err,syst_err\n";
  for (Index i = 0; i < h.nbins(); ++i) {
    out << format_number(h.axis().lower(i)) << ',' << format_number(h.axis().upper(i)) << ','
        << format_number(h.contents()(i)) << ',' << format_number(h.stat_err()(i)) << ','
        << format_number(h.syst_err() ? (*h.syst_err())(i) : 0.0) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<ErrorBudget>& trace) {
  out << "n,bias_bound,stat_integral,stat_fraction,syst_bound,total\n";
  for (const auto& b : trace) {
    out << b.n << ',' << format_number(b.bias_bound) << ',' << format_number(b.stat_integral) << ','
        << format_number(b.stat_fraction) << ',' << format_number(b.syst_bound) << ','
        << format_number(b.total) << '\n';
  }
}

void write_pairs_csv(std::ostream& out, const std::vector<MigrationPair>& pairs) {
  out << "x,y\n";
  for (const auto& p : pairs) {
    out << format_number(p.x) << ',';
    if (p.y) {
      out << format_number(*p.y);
    } else {
      out << "MISS";
    }
    out << '\n';
  }
}

std::vector<MigrationPair> read_pairs_csv(std::istream& in) {
  std::vector<MigrationPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("pairs", "line " + std::to_string(line_no) + ": expected two columns");
    const std::string xs = line.substr(0, comma);
    std::string ys = line.substr(comma + 1);
    while (!ys.empty() && ys.front() == ' ') ys.erase(ys.begin());
    if (line_no == 1 && xs == "x") continue;
    try {
      std::size_t pos = 0;
      const double x = std::stod(xs, &pos);
      if (pos != xs.size()) throw std::invalid_argument(xs);
      if (ys == "MISS") {
        pairs.push_back({x, std::nullopt});
      } else {
        const double y = std::stod(ys, &pos);
        if (pos != ys.size()) throw std::invalid_argument(ys);
        pairs.push_back({x, y});
      }
    } catch (const std::logic_error&) {
      throw ConfigError("pairs", "line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return pairs;
}

}  // namespace unfolder::io
