#pragma once

#include <stdexcept>
#include <string>

namespace sparsepat {

// Base class for all library errors. Subclasses map 1:1 onto the C API
// status codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad shapes, bad arguments, violated preconditions.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

// Filesystem / serialization failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Non-finite fields, diverged training, CFL violations caught mid-run.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace sparsepat
