#pragma once

#include <stdexcept>
#include <string>

namespace vimkit {

// Error taxonomy mirrored by the CLI exit codes: config misuse (2),
// malformed input data (3), statistical degeneracy of an estimate (4).

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class DegeneracyError : public std::runtime_error {
 public:
  explicit DegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested (n, folds, split) combination cannot produce non-empty folds.
class SizingError : public ConfigError {
 public:
  SizingError(const std::string& msg, std::size_t minimum_n)
      : ConfigError(msg), minimum_n(minimum_n) {}
  std::size_t minimum_n;
};

}  // namespace vimkit
