#pragma once

#include <stdexcept>
#include <string>

namespace molprop {

// Graph/record content violates an invariant. `tag` is a stable machine
// readable identifier; the message carries the offending field and index.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string tag, const std::string& message)
      : std::runtime_error(message), tag_(std::move(tag)) {}
  const std::string& tag() const { return tag_; }

 private:
  std::string tag_;
};

// Malformed input file (parse failure, schema mismatch). Carries the
// 1-based line number when known, 0 otherwise.
class DataError : public std::runtime_error {
 public:
  DataError(long line, const std::string& message)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Incompatible array shapes in a tensor op; message reports both shapes.
class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, failed gradient checks, diverged training.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad hyper-parameters, checkpoint/config mismatch).
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace molprop
