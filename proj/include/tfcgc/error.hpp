#pragma once

#include <stdexcept>
#include <string>

namespace tfcgc {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  InvalidArgument,  // precondition violated by the caller
  InsufficientData, // not enough samples or trials for the request
  Numeric,          // singular pivot, degenerate model, invalid spectrum
  Shape,            // mismatched dimensions or grids
  Io,               // file system or parse failure
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string &what) {
  if (!condition)
    fail(kind, what);
}

} // namespace tfcgc
