#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace outrate {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a documented contract (bad schema, bad argument,
// degenerate data). The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct RowIssue {
  std::size_t row = 0;  // 1-based data row, header excluded
  std::string column;
  std::string message;
};

// Collects every malformed row of a tabular input.
class ParseError : public ValidationError {
 public:
  explicit ParseError(std::vector<RowIssue> issues);
  const std::vector<RowIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<RowIssue> issues_;
};

class DegenerateScaleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SingularKernelError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

class DiagnosticError : public Error {
 public:
  using Error::Error;
};

}  // namespace outrate
