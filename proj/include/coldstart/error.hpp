#pragma once

#include <stdexcept>
#include <string>

namespace coldstart {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, violated preconditions, inconsistent data.
// The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures. The CLI maps these to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

// A file did not parse. Carries the 1-based line number of the offending record.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace coldstart
