#pragma once

#include <stdexcept>
#include <string>

namespace biasamp {

// Invalid configuration or schema violation. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or truncated input file (IDX, CIFAR, cache, JSONL).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition violation on runtime data (e.g. a metric over an empty group).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric failure during optimization; carries the epoch where it happened
// (-1 when unknown).
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, int epoch_at = -1)
      : std::runtime_error(what), epoch(epoch_at) {}
  int epoch;
};

} // namespace biasamp
