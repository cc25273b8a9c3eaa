#pragma once

#include <stdexcept>
#include <string>

namespace advbench {

/// Base of every error the toolkit raises. `category()` maps onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Category { contract, validation, numeric, io, capability };

  Error(Category category, const std::string& what) : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Precondition or shape violation at an API boundary.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(Category::contract, what) {}
};

/// Single-label operation called on multi-label data, or the reverse.
class TaskMismatchError : public ContractError {
 public:
  explicit TaskMismatchError(const std::string& what) : ContractError("task mismatch: " + what) {}
};

/// A config or file failed schema validation.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Category::validation, what) {}
};

/// Non-finite loss or divergence.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Category::numeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

/// Requested introspection the model does not support (e.g. attention on a plain CNN).
class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& what) : Error(Category::capability, what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace advbench
