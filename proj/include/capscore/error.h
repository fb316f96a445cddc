#pragma once

#include <stdexcept>
#include <string>

namespace capscore {

enum class ErrorKind {
  parse,
  validation,
  domain,
  shape,
  format,
  corruption,
  configuration,
  consistency,
  io,
  numeric,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; the kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// 2 validation, 3 I/O, 4 numeric.
int exit_code_for(ErrorKind kind);

}  // namespace capscore
