#pragma once

#include <stdexcept>
#include <string>

namespace avfuse {

// Raised when inputs violate a documented precondition or schema.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a file cannot be opened, read, or written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace avfuse
