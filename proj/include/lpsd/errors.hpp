#pragma once

#include <stdexcept>
#include <string>

namespace lpsd {

// Base for toolkit-specific failures. Precondition violations on plain
// arguments throw std::invalid_argument directly.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or truncated files. Message carries the byte offset where
// parsing stopped.
class FormatError : public Error {
public:
    using Error::Error;
};

// Inconsistent configuration, e.g. a checkpoint that does not match the
// data it is asked to process. Raised before any compute starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced by numeric code.
class NumericError : public Error {
public:
    using Error::Error;
};

// Iterative solver left the feasible region.
class DivergedError : public NumericError {
public:
    using NumericError::NumericError;
};

// Metric evaluated on inputs where its formula is undefined (zero vectors).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// Operation invoked on an object in the wrong state (missing gradients,
// consumed tape).
class StateError : public Error {
public:
    using Error::Error;
};

} // namespace lpsd
