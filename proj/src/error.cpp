#include "steinrec/error.hpp"

namespace steinrec {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::empty_input: return "empty input";
    case Errc::size_mismatch: return "size mismatch";
    case Errc::negative_weight: return "negative weight";
    case Errc::non_finite: return "non-finite value";
    case Errc::zero_weight: return "all weights zero";
    case Errc::unsupported_moment: return "unsupported moment order";
    case Errc::degenerate: return "degenerate law";
    case Errc::nonzero_mean: return "nonzero mean";
    case Errc::out_of_range: return "argument out of range";
    case Errc::cap_exceeded: return "atom cap exceeded";
    case Errc::unsupported: return "unsupported operation";
    case Errc::invalid_model: return "invalid model";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::marginal_mismatch: return "marginal mismatch";
    case Errc::infeasible: return "infeasible envelope";
    case Errc::config: return "config error";
    case Errc::io: return "i/o error";
    case Errc::parse: return "parse error";
  }
  return "unknown error";
}

}  // namespace steinrec
