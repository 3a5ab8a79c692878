#pragma once

#include <stdexcept>
#include <string>

namespace resgp {

// Base of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not agree (input dimension, output dimension, row counts).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent user data (non-finite values, bad CSV, bad config).
class DataError : public Error {
public:
    using Error::Error;
};

// A fidelity's inputs are not a subset of the preceding fidelity's inputs.
class NestingError : public DataError {
public:
    NestingError(const std::string& what, int fidelity, long point)
        : DataError(what), fidelity_(fidelity), point_(point) {}

    int fidelity() const noexcept { return fidelity_; }
    long point() const noexcept { return point_; }

private:
    int fidelity_;
    long point_;
};

// Cholesky failed even after jitter escalation.
class ConditioningError : public Error {
public:
    using Error::Error;
};

// Requested an operation outside the supported envelope (e.g. d > 1 bounds).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace resgp
