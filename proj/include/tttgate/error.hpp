#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace tttgate {

// Invalid configuration or arguments (shape mismatches, out-of-range
// hyperparameters). Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Where in the stream a numeric failure happened. Any field may be unknown.
struct NumericLocation {
  std::optional<std::size_t> sequence;
  std::optional<std::size_t> chunk;
  std::optional<std::size_t> token;
  std::optional<std::size_t> head;

  std::string describe() const;
};

// NaN/Inf or an undefined statistic. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, NumericLocation where = {});

  const NumericLocation& where() const noexcept { return where_; }

  // Returns a copy with unset location fields filled from `outer`.
  NumericError located(const NumericLocation& outer) const;

 private:
  std::string message_;
  NumericLocation where_;
};

// Unreadable/unwritable files and malformed binary formats. Exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tttgate
