#include "unfolder/histogram.hpp"

namespace unfolder {

std::string_view to_string(HistogramKind kind) {
  switch (kind) {
    case HistogramKind::counts:
      return "counts";
    case HistogramKind::mass:
      return "mass";
    case HistogramKind::density:
      return "density";
  }
  return "mass";
}

HistogramKind histogram_kind_from_string(std::string_view name) {
  if (name == "counts") return HistogramKind::counts;
  if (name == "mass") return HistogramKind::mass;
  if (name == "density") return HistogramKind::density;
  throw ConfigError("kind", "unknown histogram kind '" + std::string(name) + "'");
}

}  // namespace unfolder
