#pragma once

#include <stdexcept>
#include <string>

namespace nert {

// A caller broke a documented precondition (dimension mismatch, bad id, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// The requested loss has probability zero: no path survives the mask.
struct NoAdmissiblePath : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training diverged (NaN loss) or a decode produced a non-finite score.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nert
