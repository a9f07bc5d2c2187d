#pragma once

#include <stdexcept>
#include <string>

namespace mindist {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Filesystem-level failure (open, read, write).
class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed on-disk content. Carries the kind of violation; messages name
/// the byte offset or row where the problem was found.
class FormatError : public IoError {
public:
  enum class Kind {
    bad_magic,
    bad_version,
    bad_dtype,
    bad_header,
    payload_truncated,
    trailing_data,
    non_finite_value,
    negative_weight,
    weight_sum,
    bad_field,
  };

  FormatError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

/// Precondition violation on an operation's inputs.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Numerical failure inside a computation (non-finite intermediate,
/// eigensolver breakdown).
class ComputeError : public Error {
public:
  using Error::Error;
};

}  // namespace mindist
