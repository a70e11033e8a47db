#pragma once

#include <stdexcept>
#include <string>

namespace cladyn {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotHermitian : Error {
    using Error::Error;
};

struct DegenerateSpectrum : Error {
    using Error::Error;
};

struct FrameMismatch : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

struct StepSizeUnderflow : Error {
    using Error::Error;
};

struct NonFiniteState : Error {
    using Error::Error;
};

struct WindowTooWide : Error {
    using Error::Error;
};

struct SimplexViolation : Error {
    using Error::Error;
};

struct SupportViolation : Error {
    using Error::Error;
};

struct TraceDrift : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

struct ValueError : Error {
    using Error::Error;
};

}  // namespace cladyn
