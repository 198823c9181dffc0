#pragma once

#include <stdexcept>
#include <string>

namespace fguap {

/// Base for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad argument value (range, count, unknown tag).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An operation produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Cosine similarity (or a loss built on it) was handed a zero-norm vector.
class DegenerateFeatureError : public Error {
 public:
  using Error::Error;
};

/// Failure while reading one of the binary containers.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kTruncated,
    kChecksum,
    kVersion,
    kMalformedHeader,
    kTensorCount,
    kTensorShape,
    kArchitectureMismatch,
    kValidation,
    kIo,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace fguap
