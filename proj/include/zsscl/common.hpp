#pragma once

#include <stdexcept>
#include <string>

namespace zsscl {

// Error taxonomy shared across the library. The CLI maps UsageError and
// ParseError to exit code 2, TrainingError to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct UsageError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct TrainingError : Error {
    using Error::Error;
};

}  // namespace zsscl
