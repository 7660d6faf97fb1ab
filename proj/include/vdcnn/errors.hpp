#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vdcnn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not agree (or an extent is zero).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An index (token id, class label, position) is outside its legal range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the recording tape: non-scalar loss, double backward, foreign Var.
class TapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where only finite values are legal.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string name, const std::string& what)
      : Error(what), name_(std::move(name)) {}

  /// Name of the parameter (or quantity) that went non-finite.
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Invalid architecture or run configuration. The message names the violated rule.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input data (dataset files, encodings that do not fit a model).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace vdcnn
