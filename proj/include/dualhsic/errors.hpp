#pragma once

#include <stdexcept>
#include <string>

namespace dualhsic {

// Dimension or layout mismatch between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration value (bad kernel bandwidth, unknown key, ...).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Batch too small for the requested statistic (HSIC needs n >= 2).
struct DegenerateBatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Sampling from a rehearsal buffer that holds no entries.
struct EmptyBufferError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient encountered during training.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File I/O or format failure (checkpoints, datasets, results).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dualhsic
