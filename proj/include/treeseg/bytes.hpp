#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "treeseg/error.hpp"

namespace treeseg {

static_assert(std::endian::native == std::endian::little,
              "binary codecs assume a little-endian host");

/// Bounds-checked little-endian cursor over a byte buffer.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  std::size_t offset() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void seek(std::size_t offset) {
    if (offset > bytes_.size()) fail("seek past end of data", offset);
    pos_ = offset;
  }

  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
      fail("truncated " + std::string(what) + ": need " + std::to_string(n) + " bytes, " +
               std::to_string(remaining()) + " available",
           pos_);
    }
  }

  template <typename T>
  T read(std::string_view what = "field") {
    static_assert(std::is_trivially_copyable_v<T>);
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
  T peek_at(std::size_t offset, std::string_view what = "field") const {
    if (offset + sizeof(T) > bytes_.size()) {
      fail("truncated " + std::string(what), offset);
    }
    T value;
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    return value;
  }

  std::string read_string(std::size_t n, std::string_view what = "string") {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& message, std::size_t offset) const {
    throw FormatError(context_ + ": " + message + " at byte offset " + std::to_string(offset),
                      offset);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  template <typename T>
  void write(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void write_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  /// Writes `s` truncated or zero-padded to exactly `n` bytes.
  void write_fixed(std::string_view s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      bytes_.push_back(i < s.size() ? static_cast<std::uint8_t>(s[i]) : 0);
    }
  }

  template <typename T>
  void patch(std::size_t offset, T value) {
    std::memcpy(bytes_.data() + offset, &value, sizeof(T));
  }

  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

}  // namespace treeseg
