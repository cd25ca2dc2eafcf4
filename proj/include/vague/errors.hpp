#pragma once

#include <stdexcept>
#include <string>

namespace vague {

// Bad input data: malformed records, out-of-range values, incompatible files.
// CLI maps these to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid API or CLI usage. CLI maps these to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape-incompatible tensor operands.
struct ShapeError : UsageError {
    using UsageError::UsageError;
};

// Numerical divergence: NaN/Inf in an op output or a training loss.
// CLI maps these to exit code 3.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace vague
