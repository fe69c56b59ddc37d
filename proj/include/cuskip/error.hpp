#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cuskip {

// Precondition on an argument's value was violated (negative rate, CU outside
// frame, QP out of range, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A statistic that has no defined value for the given input, e.g. Pearson
// correlation of a constant column or BD-rate without overlapping quality.
class UndefinedResult : public DomainError {
 public:
  using DomainError::DomainError;
};

// Caller used an API out of order (feature extraction before both mode tests).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad configuration, e.g. a criteria file naming an unknown feature.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input. Carries the source name and 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

}  // namespace cuskip
