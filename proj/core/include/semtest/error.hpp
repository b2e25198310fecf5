#pragma once

#include <stdexcept>
#include <string>

namespace semtest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes incompatible with the requested operation.
class ShapeError : public Error {
 public:
  ShapeError(std::string operation, std::string lhs, std::string rhs)
      : Error(operation + ": incompatible shapes " + lhs + " and " + rhs),
        operation_(std::move(operation)),
        lhs_(std::move(lhs)),
        rhs_(std::move(rhs)) {}

  const std::string& operation() const noexcept { return operation_; }
  const std::string& lhs_shape() const noexcept { return lhs_; }
  const std::string& rhs_shape() const noexcept { return rhs_; }

 private:
  std::string operation_;
  std::string lhs_;
  std::string rhs_;
};

/// A precondition on an argument value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace semtest
