#pragma once

#include <stdexcept>
#include <string>

namespace kmp {

/// Raised for unknown systems, invalid variants and malformed settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a scenario, trajectory, result or library file does not match
/// its schema. The message carries the file path and, where known, the line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when offline primitive generation fails too often to make progress.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kmp
