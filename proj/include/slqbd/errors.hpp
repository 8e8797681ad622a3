#pragma once

#include <stdexcept>
#include <string>

namespace slqbd {

// Error taxonomy. The numeric values double as C API status codes and CLI
// exit codes, so they must stay stable.
enum class ErrorKind {
  Applicability = 2, // structural precondition fails (method does not apply)
  Numerical = 3,     // method applies but the computation breaks down
  Input = 4,         // malformed or inconsistent user input
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

struct ApplicabilityError : Error {
  explicit ApplicabilityError(const std::string& w)
      : Error(ErrorKind::Applicability, w) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& w)
      : Error(ErrorKind::Numerical, w) {}
};

struct InputError : Error {
  explicit InputError(const std::string& w) : Error(ErrorKind::Input, w) {}
};

} // namespace slqbd
