#pragma once

#include <stdexcept>
#include <string>

namespace gvvad {

/// Process exit codes shared by every command.
enum class ExitCode : int {
  ok = 0,
  numeric = 1,
  validation = 2,
  io = 3,
};

/// Base of every error the library throws. Each subclass carries the exit
/// code the CLI reports for it.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ExitCode::validation, "shape error: " + what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

/// Checksum or envelope damage in a binary file.
class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what)
      : Error(ExitCode::io, "integrity error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ExitCode::numeric, "numeric error: " + what) {}
};

}  // namespace gvvad
