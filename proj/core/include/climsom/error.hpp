#pragma once

#include <stdexcept>
#include <string>

namespace climsom {

enum class ErrorKind {
  kInvalidArgument,
  kNotFound,
  kConflict,
  kDataError,
  kUnavailable,
  kCancelled,
};

// All engine failures surface as this exception; the kind drives the HTTP
// status the service reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string const& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string const& message) {
  throw Error(kind, message);
}

[[noreturn]] inline void invalid(std::string const& message) {
  throw Error(ErrorKind::kInvalidArgument, message);
}

}  // namespace climsom
