#pragma once

#include <stdexcept>
#include <string>

namespace clothkit {

/// Broad failure category; the CLI maps each kind onto an exit code.
enum class ErrorKind {
  Format,       // malformed file contents
  Consistency,  // inputs disagree with each other (e.g. depth vs mask size)
  Domain,       // parameter outside the valid domain of a function
  Fit,          // least-squares system is rank deficient
  Config,       // invalid configuration or usage
  Dimension,    // vector/matrix dimensions do not match
  Io,           // file system failure
  Numeric,      // solver failed to produce a finite answer
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace clothkit
