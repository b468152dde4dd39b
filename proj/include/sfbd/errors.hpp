#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfbd {

// Argument outside the mathematical domain of an operation (t outside [0, T],
// r >= s, empty batch, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Dimension mismatch between points, parameter vectors or matrices.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during a computation. `index` identifies the
// offending coordinate, integration step, or kernel node depending on the site.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Invalid configuration or distribution spec; `field` is the offending key path.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Dataset / checkpoint file errors.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MalformedHeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedPayloadError : public FormatError {
 public:
  using FormatError::FormatError;
};
class ChecksumMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace sfbd
