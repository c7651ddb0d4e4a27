#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tome {

/// Malformed file content (weight container, PPM). Carries the byte offset
/// at which parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t byte_offset)
      : std::runtime_error(message + " (at byte offset " +
                           std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed input that is inconsistent with the model configuration
/// (tensor shape mismatch, missing tensor, bad schedule length, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tome
