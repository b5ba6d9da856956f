#pragma once

#include <stdexcept>
#include <string>

namespace jprlc {

// Base of every error raised by the library. Callers that only care about
// the exit-code contract can catch this and inspect kind().
class Error : public std::runtime_error {
 public:
  enum class Kind { Config, Numeric, Degenerate, Parse, Io };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Invalid user-supplied configuration or malformed experiment setup.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

// Non-finite value or empty denominator inside a numeric kernel.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(Kind::Numeric, what) {}
};

// A closed-form block had no support (e.g. all posterior mass on the outlier class).
struct DegenerateError : Error {
  explicit DegenerateError(const std::string& what) : Error(Kind::Degenerate, what) {}
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error(Kind::Parse, what + " (line " + std::to_string(line) + ")"),
        message_(what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }
  // The description without the line suffix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(Kind::Io, what) {}
};

}  // namespace jprlc
