#include "unfolder/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace unfolder::svg {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Round tick spacing covering [lo, hi] with about `target` ticks.
double nice_step(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  const double nice = r < 1.5 ? 1 : r < 3 ? 2 : r < 7 ? 5 : 10;
  return nice * mag;
}

}  // namespace

Series density_series(const Histogram& h, std::string label, std::string color) {
  const Vector<double> vol = h.axis().volumes();
  Series s{std::move(label), h.axis(), h.contents().cwiseQuotient(vol),
           Vector<double>(h.stat_err().cwiseQuotient(vol)), std::move(color)};
  return s;
}

std::string render(const std::vector<Series>& series, const PlotOptions& options) {
  const double left = 80, right = 20, top = 40, bottom = 60;
  const double w = options.width - left - right;
  const double h = options.height - top - bottom;

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    xmin = std::min(xmin, s.axis.low());
    xmax = std::max(xmax, s.axis.high());
    for (Index i = 0; i < s.values.size(); ++i) {
      const double e = s.errors ? (*s.errors)(i) : 0.0;
      const double lo = s.values(i) - e;
      const double hi = s.values(i) + e;
      if (options.log_y) {
        if (s.values(i) > 0) ymin = std::min(ymin, s.values(i));
      } else {
        ymin = std::min(ymin, lo);
      }
      ymax = std::max(ymax, hi);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymax)) ymax = 1;
  if (options.log_y) {
    if (!std::isfinite(ymin) || ymin <= 0) ymin = ymax > 0 ? ymax * 1e-6 : 1e-6;
    if (ymax <= ymin) ymax = ymin * 10;
    ymin = std::pow(10.0, std::floor(std::log10(ymin)));
    ymax = std::pow(10.0, std::ceil(std::log10(ymax)));
  } else {
    ymin = std::min(ymin, 0.0);
    if (ymax <= ymin) ymax = ymin + 1;
    ymax += 0.05 * (ymax - ymin);
  }

  const auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * w; };
  const auto py = [&](double y) {
    double t;
    if (options.log_y) {
      y = std::max(y, ymin);
      t = (std::log10(y) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin));
    } else {
      t = (y - ymin) / (ymax - ymin);
    }
    return top + (1.0 - std::clamp(t, -0.02, 1.02)) * h;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty())
    out << "<text x=\"" << fmt(left + w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << escape(options.title) << "</text>\n";

  // axes and ticks
  out << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(w)
      << "\" height=\"" << fmt(h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double xs = nice_step(xmin, xmax, 8);
  for (double t = std::ceil(xmin / xs) * xs; t <= xmax + 1e-9 * xs; t += xs) {
    out << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(top + h) << "\" x2=\"" << fmt(px(t))
        << "\" y2=\"" << fmt(top + h + 5) << "\" stroke=\"black\"/>";
    out << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(top + h + 18)
        << "\" text-anchor=\"middle\">" << tick_label(std::abs(t) < 1e-12 * xs ? 0.0 : t)
        << "</text>\n";
  }
  if (options.log_y) {
    for (double t = ymin; t <= ymax * 1.0001; t *= 10) {
      out << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << fmt(left)
          << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"black\"/>";
      out << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py(t) + 4)
          << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
    }
  } else {
    const double ys = nice_step(ymin, ymax, 6);
    for (double t = std::ceil(ymin / ys) * ys; t <= ymax; t += ys) {
      out << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << fmt(left)
          << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"black\"/>";
      out << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py(t) + 4)
          << "\" text-anchor=\"end\">" << tick_label(std::abs(t) < 1e-12 * ys ? 0.0 : t)
          << "</text>\n";
    }
    if (ymin < 0)
      out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py(0)) << "\" x2=\"" << fmt(left + w)
          << "\" y2=\"" << fmt(py(0)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }
  out << "<text x=\"" << fmt(left + w / 2) << "\" y=\"" << fmt(options.height - 15)
      << "\" text-anchor=\"middle\">" << escape(options.x_label) << "</text>\n";
  out << "<text transform=\"translate(18," << fmt(top + h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(options.y_label) << "</text>\n";

  for (const auto& s : series) {
    out << "<g stroke=\"" << escape(s.color) << "\" fill=\"none\">\n<path d=\"";
    for (Index i = 0; i < s.values.size(); ++i) {
      out << (i == 0 ? "M" : " L") << fmt(px(s.axis.lower(i))) << ' ' << fmt(py(s.values(i)));
      out << " L" << fmt(px(s.axis.upper(i))) << ' ' << fmt(py(s.values(i)));
    }
    out << "\"/>\n";
    if (s.errors) {
      for (Index i = 0; i < s.values.size(); ++i) {
        const double e = (*s.errors)(i);
        if (e <= 0) continue;
        const double c = px(s.axis.center(i));
        out << "<line x1=\"" << fmt(c) << "\" y1=\"" << fmt(py(s.values(i) - e)) << "\" x2=\""
            << fmt(c) << "\" y2=\"" << fmt(py(s.values(i) + e)) << "\"/>";
      }
      out << '\n';
    }
    out << "</g>\n";
  }

  // legend
  double ly = top + 16;
  for (const auto& s : series) {
    out << "<line x1=\"" << fmt(left + w - 150) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
        << fmt(left + w - 125) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << escape(s.color)
        << "\" stroke-width=\"2\"/>";
    out << "<text x=\"" << fmt(left + w - 118) << "\" y=\"" << fmt(ly) << "\">" << escape(s.label)
        << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace unfolder::svg
