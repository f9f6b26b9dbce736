#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dgstgcn {

// Error categories map one-to-one onto CLI exit codes (see tools/dgstgcn.cpp).

/// Invalid or inconsistent configuration (bad kernel, K > C, unknown keys, ...).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes that do not fit together.
class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad data: empty sequences, labels out of range, mismatched score sets.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary file. `offset` is the byte position where parsing stopped.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string &what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

/// Non-finite values in activations, gradients or losses.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace dgstgcn
