#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace raterlens {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input that could not be decoded (bad JSON, bad CSV row, unparseable reply).
struct ParseError : Error {
    using Error::Error;
};

/// Structurally decodable input that violates a schema invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// Inconsistent or infeasible configuration supplied by the caller.
struct ConfigError : Error {
    using Error::Error;
};

/// Vector/matrix dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

/// Non-finite value encountered during numeric evaluation.
struct NumericError : Error {
    using Error::Error;
};

/// Training failed to make progress (divergence, empty data).
struct TrainingError : Error {
    using Error::Error;
};

/// Remote endpoint unreachable after bounded retries.
struct TransportError : Error {
    using Error::Error;
};

/// Stored or received payload fails its integrity check.
struct IntegrityError : Error {
    using Error::Error;
};

/// Key not found where a lookup was required.
struct LookupError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

/// Batch operation failure; carries the indices of the elements that failed.
struct BatchError : Error {
    BatchError(const std::string& msg, std::vector<std::size_t> indices)
        : Error(msg), failed_indices(std::move(indices)) {}
    std::vector<std::size_t> failed_indices;
};

}  // namespace raterlens
