#pragma once

#include <stdexcept>
#include <string>

namespace uwno {

/// Shape or dimension mismatch between tensors (CLI exit code 5).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument values: bad wavelet name, level out of range, malformed
/// config, ... (CLI exit code 2).
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File-system and serialization failures (CLI exit code 3).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// NaN/Inf encountered where finite values are required (CLI exit code 4).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A property-suite invariant was violated (CLI exit code 6).
struct PropertyError : std::runtime_error {
    explicit PropertyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace uwno
