#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace akde {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values entering or leaving a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated a precondition (e.g. backward from a non-scalar root).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Attention or softmax over a sequence with no unmasked position.
class EmptyAttentionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Input parses line by line but violates a structural rule (eval blocks, dims).
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace akde
