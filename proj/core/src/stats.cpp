#include "riskgrid/stats.hpp"

#include <cmath>

#include "riskgrid/error.hpp"

namespace riskgrid {

const char* to_string(errc c) {
  switch (c) {
    case errc::invalid_geometry: return "invalid-geometry";
    case errc::projection: return "projection";
    case errc::insufficient_points: return "insufficient-points";
    case errc::not_enough_cells: return "not-enough-cells";
    case errc::naming_conflict: return "naming-conflict";
    case errc::zero_variance: return "zero-variance";
    case errc::collinearity: return "collinearity";
    case errc::domain: return "domain";
    case errc::schema_mismatch: return "schema-mismatch";
    case errc::undefined_metric: return "undefined-metric";
    case errc::bad_input: return "bad-input";
    case errc::io: return "io";
    case errc::numeric: return "numeric";
  }
  return "unknown";
}

bool is_input_error(errc c) {
  switch (c) {
    case errc::invalid_geometry:
    case errc::projection:
    case errc::insufficient_points:
    case errc::not_enough_cells:
    case errc::naming_conflict:
    case errc::schema_mismatch:
    case errc::bad_input:
    case errc::io:
      return true;
    default:
      return false;
  }
}

namespace stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

}  // namespace stats
}  // namespace riskgrid
