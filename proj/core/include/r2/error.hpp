#pragma once

#include <stdexcept>
#include <string>

namespace r2 {

// Invalid configuration values or shapes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to an otherwise valid object (dimension mismatch, bad index).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed serialized data. `record()` is the zero-based record index that
// failed, `line()` the one-based line in the stream.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t record)
      : std::runtime_error(what), line_(line), record_(record) {}

  std::size_t line() const { return line_; }
  std::size_t record() const { return record_; }

 private:
  std::size_t line_;
  std::size_t record_;
};

// Sampling from a buffer that does not hold enough items yet.
class NotReadyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called in the wrong state (e.g. stepping a finished episode).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A demonstration that cannot be ingested (empty or unsuccessful).
class RejectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace r2
