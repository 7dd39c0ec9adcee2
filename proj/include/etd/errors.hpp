#pragma once

#include <stdexcept>
#include <string>

namespace etd {

// Tensor or vector dimensions disagree with the layer/cell they are fed to.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value is outside the domain an operation accepts (non-finite input,
// invalid distribution, out-of-range index, unknown action id).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An API was called out of order, e.g. backward without a recorded forward.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Buffers or decision-point sequences that violate their own invariants.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A masked loss was asked to average over zero awake entries.
class DegenerateBatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace etd
