#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emgait {

enum class Errc {
  malformed_file,
  non_monotonic_events,
  empty_channel,
  invalid_config,
  too_few_events,
  out_of_cycle,
  invalid_band,
  signal_too_short,
  invalid_factor,
  not_fitted,
  degenerate_input,
  bad_k,
  missing_class,
  empty_input,
  singular_covariance,
  shape_mismatch,
  non_finite_gradient,
  empty_split,
  corrupt_blob,
  too_few_subjects,
  io_error,
};

std::string_view errc_name(Errc code) noexcept;

/// Every validation failure in the library surfaces as this type; `code()`
/// identifies the failure class so callers and tests can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace emgait
