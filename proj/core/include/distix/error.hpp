#pragma once

#include <stdexcept>
#include <string>

namespace distix {

enum class ErrorKind {
  InvalidArgument,    // precondition on a scalar argument violated
  Io,                 // file missing, unreadable or unwritable
  Format,             // bytes do not follow the expected file format
  DimensionMismatch,  // rasters that must agree in size do not
  Domain,             // evaluation point outside a function's domain
  Divergence,         // numerical procedure produced non-finite values
};

// Every error raised by the library carries a kind so that front ends (CLI
// exit codes, HTTP statuses) can map failures without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace distix
