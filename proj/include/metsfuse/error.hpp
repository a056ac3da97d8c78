#pragma once

#include <stdexcept>
#include <string>

namespace metsfuse {

/// Malformed input data: bad records, missing fields, unreadable files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape or argument contract violated by a caller.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, divergence, singular systems.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit or build step saw records from outside the training partition.
class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration or option combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace metsfuse
