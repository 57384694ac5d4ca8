#pragma once

#include <stdexcept>
#include <string>

namespace csilab {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };        // shape/size violations
struct ParameterError : Error { using Error::Error; };        // invalid scalar arguments
struct SingularityError : Error { using Error::Error; };      // numerically singular solves
struct ConfigError : Error { using Error::Error; };           // inconsistent configuration
struct FormatError : Error { using Error::Error; };           // malformed files
struct IndexError : Error { using Error::Error; };            // out-of-range indices
struct DegenerateInputError : Error { using Error::Error; };  // zero-energy / empty inputs
struct DivergenceError : Error { using Error::Error; };       // non-finite values during iteration
struct IoError : Error { using Error::Error; };               // filesystem failures

} // namespace csilab
