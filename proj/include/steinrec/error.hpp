#pragma once

#include <stdexcept>
#include <string>

namespace steinrec {

enum class Errc {
  empty_input,
  size_mismatch,
  negative_weight,
  non_finite,
  zero_weight,
  unsupported_moment,
  degenerate,
  nonzero_mean,
  out_of_range,
  cap_exceeded,
  unsupported,
  invalid_model,
  dimension_mismatch,
  marginal_mismatch,
  infeasible,
  config,
  io,
  parse,
};

const char* to_string(Errc code);

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can tell them apart.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace steinrec
