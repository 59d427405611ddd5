#pragma once

#include <stdexcept>

namespace qme {

// Every failure mode the library signals derives from Error, so callers (and
// the CLI) can translate failures into stable one-line diagnostics.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SizeLimit : Error { using Error::Error; };         // dimension beyond the dense cap
struct BadSite : Error { using Error::Error; };           // site index outside 1..n
struct NotHermitian : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };       // scalar function undefined at an eigenvalue
struct BadStrength : Error { using Error::Error; };       // measurement strength outside [0,1]
struct UnsupportedSize : Error { using Error::Error; };   // operation fixed to a specific qubit count
struct NumericalDrift : Error { using Error::Error; };    // imaginary residue above tolerance
struct SupportViolation : Error { using Error::Error; };  // relative entropy with deficient support
struct SearchFailed : Error { using Error::Error; };
struct CrossCheckFailed : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };

}  // namespace qme
