#pragma once

#include <stdexcept>
#include <string>

namespace ddvc {

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A data file does not match the expected column schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Sample indices are not contiguous in time.
class DataGapError : public Error {
public:
    using Error::Error;
};

/// Fewer samples than the operation requires.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Vector/matrix dimensions are inconsistent.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// The data matrices do not satisfy the persistency-of-excitation rank
/// condition required by the operation.
class PersistencyError : public Error {
public:
    using Error::Error;
};

/// Least-squares regressor is rank deficient.
class IllPosedFitError : public Error {
public:
    using Error::Error;
};

/// The semidefinite program has no solution.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be inverted is numerically singular.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Problem in a run configuration file.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Fixed-point iteration for the control input did not converge and the
/// fallback was disabled.
class FixedPointError : public Error {
public:
    using Error::Error;
};

} // namespace ddvc
