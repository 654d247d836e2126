#pragma once

#include <stdexcept>
#include <string>

namespace artgan {

// Incompatible tensor shapes or layer wiring.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid model / training / command configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed files, unreadable paths, failed writes.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation invoked in a state that does not support it
// (e.g. eval-mode batchnorm without running statistics).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace artgan
