#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace valrl {

// A caller broke a documented precondition (bad shape, out-of-range action,
// negative priority, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, std::string token, const std::string& message)
      : ConfigError("line " + std::to_string(line) + ": " + message +
                    " (at '" + token + "')"),
        line_(line),
        token_(std::move(token)) {}

  std::size_t line() const { return line_; }
  const std::string& token() const { return token_; }

 private:
  std::size_t line_;
  std::string token_;
};

// Not enough valid transitions to assemble a batch yet. Callers may retry
// after more data has been added.
class ReplayNotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Serialized bytes could not be decoded (bad magic, version, checksum...).
class RestoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients during learning.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace valrl
