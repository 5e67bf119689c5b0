#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace treeseg {

/// Invalid arguments or violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data that cannot be processed: empty clouds, misaligned files, missing tree bases.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated file content. `offset` is the byte offset (binary formats)
/// or the 1-based line number (text formats) where the problem was detected.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : DataError(what), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace treeseg
