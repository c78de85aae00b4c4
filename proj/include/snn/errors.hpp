#pragma once

#include <stdexcept>
#include <string>

namespace snn {

// Invalid hyperparameters or malformed configuration files.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller-supplied data that violates a contract (bad label, shape mismatch, missing path).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// On-disk format problems. Message carries the byte offset where parsing stopped.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values encountered during training or gradient accumulation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace snn
