#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsch {

/// Violated precondition on an argument or configuration value.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Input that is well-formed but has no defined result (zero-norm vector, empty row).
class DegenerateInputError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Malformed file contents. Carries the path and byte offset of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string path, std::size_t offset, const std::string& what)
      : std::runtime_error(path + " @ byte " + std::to_string(offset) + ": " + what),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky breakdown. `index()` is the diagonal position whose pivot was not positive.
class NonPsdError : public NumericError {
 public:
  NonPsdError(std::size_t index, const std::string& what)
      : NumericError(what + " (non-positive pivot at diagonal index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace dsch
