#pragma once

#include <stdexcept>
#include <string>

namespace trait {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension mismatches. Messages name the offending layer or field.
struct ShapeError : Error {
    using Error::Error;
};

// NaN/Inf where finite values are required.
struct NumericError : Error {
    using Error::Error;
};

// Malformed config files, unknown keys, invalid parameter combinations.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem failures (open/read/write).
struct IoError : Error {
    using Error::Error;
};

// Serialized artifact problems, split by kind so callers can tell them apart.
struct FormatError : Error {
    using Error::Error;
};
struct BadMagicError : FormatError {
    using FormatError::FormatError;
};
struct VersionError : FormatError {
    using FormatError::FormatError;
};
struct TruncationError : FormatError {
    using FormatError::FormatError;
};

// Not enough qualifying examples (e.g. benign pool selection deficit).
struct InsufficientDataError : Error {
    using Error::Error;
};

// Degenerate normalization (max == min) in min-max scaling.
struct DegenerateNormalizationError : Error {
    using Error::Error;
};

// Deep-SVDD hypersphere collapse symptom during training.
struct CollapseError : Error {
    using Error::Error;
};

} // namespace trait
