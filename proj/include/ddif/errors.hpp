#pragma once

#include <stdexcept>
#include <string>

namespace ddif {

// Error taxonomy shared by every module. The CLI maps any of these to
// exit code 2 (data error); programming errors surface as the base type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/vector dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

// A parameter is outside its valid range (temperature <= 0, gamma <= 0, ...).
struct ParamError : Error {
    using Error::Error;
};

// Input is structurally valid but degenerate (zero-norm vector,
// single-label dataset, bank missing a polarity class).
struct DegenerateError : Error {
    using Error::Error;
};

// A file failed to parse; message carries the offending line number.
struct ParseError : Error {
    using Error::Error;
};

// Filesystem-level failure (cannot open / write).
struct IoError : Error {
    using Error::Error;
};

}  // namespace ddif
