#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dappr {

// Bad input shape, range or configuration. CLI exit code 1.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the region where a closed form holds (e.g. some alpha_k <= 1).
class ValidityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Quantity undefined for a degenerate Dirichlet (alpha0 == 0).
class DegenerateError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Ranking metric requested on single-class input.
class MetricUndefinedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class StratificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace dappr
