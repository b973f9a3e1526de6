#pragma once

#include "error.hpp"

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avf {

/// Little-endian append-only buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) {
    bytes_.push_back(v);
  }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
      u8(static_cast<std::uint8_t>(v >> s));
    }
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) {
      u8(static_cast<std::uint8_t>(v >> s));
    }
  }
  void i32(std::int32_t v) {
    u32(static_cast<std::uint32_t>(v));
  }
  void f32(float v) {
    u32(std::bit_cast<std::uint32_t>(v));
  }
  void raw(std::string_view s) {
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> s) {
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  /// Fixed-width, zero padded; longer input is truncated.
  void fixedString(std::string_view s, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) {
      u8(i < s.size() ? static_cast<std::uint8_t>(s[i]) : 0);
    }
  }
  void padTo(std::size_t alignment, std::uint8_t fill = 0) {
    while (bytes_.size() % alignment != 0) {
      u8(fill);
    }
  }
  void patchU32(std::size_t offset, std::uint32_t v) {
    for (int s = 0; s < 4; ++s) {
      bytes_.at(offset + s) = static_cast<std::uint8_t>(v >> (8 * s));
    }
  }

  std::size_t size() const {
    return bytes_.size();
  }
  const std::vector<std::uint8_t>& bytes() const {
    return bytes_;
  }
  std::vector<std::uint8_t> take() {
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; overruns throw Error(Parse).
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + s]) << (8 * s);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::int32_t i32() {
    return static_cast<std::int32_t>(u32());
  }
  float f32() {
    return std::bit_cast<float>(u32());
  }
  /// Three floats in stream order.
  Eigen::Vector3d vec3f() {
    const double x = f32();
    const double y = f32();
    const double z = f32();
    return {x, y, z};
  }
  std::string string(std::size_t length) {
    need(length);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), length);
    pos_ += length;
    return s;
  }
  std::span<const std::uint8_t> bytes(std::size_t length) {
    need(length);
    auto s = bytes_.subspan(pos_, length);
    pos_ += length;
    return s;
  }

  std::size_t position() const {
    return pos_;
  }
  std::size_t remaining() const {
    return bytes_.size() - pos_;
  }
  void seek(std::size_t pos) {
    if (pos > bytes_.size()) {
      throw Error(ErrorCode::Parse, "seek past end of buffer");
    }
    pos_ = pos;
  }
  /// Throws unless at least `count * elementSize` bytes remain.
  void expectAtLeast(std::uint64_t count, std::uint64_t elementSize) const {
    if (elementSize != 0 && count > remaining() / elementSize) {
      throw Error(ErrorCode::Parse, "declared size exceeds remaining data");
    }
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) {
      throw Error(ErrorCode::Parse, "unexpected end of binary data at byte " +
                                        std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> readFileBytes(const std::filesystem::path& path);
std::string readFileText(const std::filesystem::path& path);
void writeFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void writeFileText(const std::filesystem::path& path, std::string_view text);

} // namespace avf
