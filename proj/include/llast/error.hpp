// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace llast {

// Error taxonomy maps onto the CLI exit codes: config/usage -> 2,
// io/integrity -> 3, numeric failure -> 4.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unknown language code.
struct RegistryError : ConfigError {
    using ConfigError::ConfigError;
};

// Tensor shape contract violations.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sequence or frame count over a configured limit.
struct LengthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// backward() called on an already-consumed tape.
struct StaleTapeError : std::logic_error {
    using std::logic_error::logic_error;
};

// Loss over an empty batch or an all-false mask.
struct DegenerateBatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// merge/unmerge called in the wrong adapter state.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Corrupt or truncated files, checksum mismatch.
struct IntegrityError : IoError {
    using IoError::IoError;
};

// Malformed manifest or data file text.
struct ParseError : IoError {
    using IoError::IoError;
};

// NaN/Inf aborts during training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace llast
