#pragma once

#include <stdexcept>
#include <string>

namespace rtucker {

// Argument errors are reported through std::invalid_argument directly.

/// A numerical routine met an input it cannot handle (singular selection,
/// rank-deficient factor, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line, const std::string& source = {})
      : std::runtime_error((source.empty() ? "" : source + ": ") +
                           (line > 0 ? "line " + std::to_string(line) + ": " + what : what)),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rtucker
