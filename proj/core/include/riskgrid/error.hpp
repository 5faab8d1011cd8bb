#pragma once

#include <stdexcept>
#include <string>

namespace riskgrid {

// Error categories. The CLI maps these onto exit codes: input-side problems
// exit 1, numeric/model failures exit 2.
enum class errc {
  invalid_geometry,
  projection,
  insufficient_points,
  not_enough_cells,
  naming_conflict,
  zero_variance,
  collinearity,
  domain,
  schema_mismatch,
  undefined_metric,
  bad_input,
  io,
  numeric,
};

const char* to_string(errc c);

// True for errors caused by bad inputs (files, config, geometry) as opposed
// to numeric failures discovered mid-computation.
bool is_input_error(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace riskgrid
