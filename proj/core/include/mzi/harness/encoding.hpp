#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mzi::harness {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Values in [0, 1] quantised to 8 bits (round to nearest).
std::vector<std::uint8_t> to_gray8(std::span<const float> values);

/// Lossless 8-bit grayscale PNG of a row-major width x height image.
std::vector<std::uint8_t> encode_png_gray8(std::span<const std::uint8_t> pixels, int width, int height);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes an 8-bit grayscale PNG. Throws std::runtime_error otherwise.
GrayImage decode_png_gray8(std::span<const std::uint8_t> png);

}  // namespace mzi::harness
