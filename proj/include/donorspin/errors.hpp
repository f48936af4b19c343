#pragma once

// Error taxonomy shared by every module.
//
// Three failure families map onto the CLI exit codes:
//   std::invalid_argument  - bad parameter values / degenerate problem setups (exit 2)
//   IngestError            - unreadable or malformed input files            (exit 3)
//   NumericError           - iterative methods failed to converge           (exit 4)

#include <stdexcept>
#include <string>

namespace donorspin {

// Input file could not be read or parsed.
struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative numerical method failed (eigensolver, root finder, fitter).
// Never silently returns garbage; callers may catch and report best-so-far.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Adiabatic state tracking became ambiguous (grid too coarse).
struct TrackingError : NumericError {
  TrackingError(const std::string& msg, double B_lo, double B_hi)
      : NumericError(msg), interval_lo(B_lo), interval_hi(B_hi) {}
  double interval_lo;  // offending sweep interval, mT
  double interval_hi;
};

}  // namespace donorspin
