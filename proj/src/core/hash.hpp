#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace avf {

/// Lowercase hex SHA-256.
std::string sha256Hex(std::span<const std::uint8_t> bytes);
std::string sha256Hex(std::string_view text);
std::string sha256File(const std::filesystem::path& path);

/// SplitMix64 finalizer; a counter-based generator when fed consecutive keys.
std::uint64_t splitmix64(std::uint64_t x);

/// Uniform double in [0, 1) determined only by (seed, a, b).
double keyedUniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

} // namespace avf
