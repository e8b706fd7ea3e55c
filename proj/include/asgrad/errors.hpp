// Error taxonomy shared across the library.
//
// The CLI maps these onto exit codes: configuration / input problems -> 2,
// numeric divergence -> 3 (signalled via Trace::diverged_at, not an
// exception), missing snapshots or incomplete traces -> 4.
#pragma once

#include <stdexcept>
#include <string>

namespace asgrad {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct CadenceError : Error { using Error::Error; };
struct IncompleteTraceError : Error { using Error::Error; };
struct ContractViolationError : Error { using Error::Error; };

}  // namespace asgrad
