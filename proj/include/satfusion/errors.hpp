#pragma once

#include <stdexcept>
#include <string>

namespace satfusion {

// Error categories. The CLI maps each to a distinct exit code.

/// Malformed or inconsistent input data (corpus, pools, files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimension mismatch.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or serialization failure, including refused checkpoints.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse, e.g. running backward twice on one graph.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace satfusion
