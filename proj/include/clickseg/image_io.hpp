#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "clickseg/core.hpp"

namespace clickseg {

/// Decodes PNG or JPEG bytes to RGB. Throws FormatError when the bytes are not a decodable image.
[[nodiscard]] RasterImage decode_image(std::span<const std::uint8_t> bytes);
[[nodiscard]] RasterImage read_image(const std::filesystem::path& path);

/// Any nonzero channel value counts as foreground.
[[nodiscard]] BinaryMask decode_mask(std::span<const std::uint8_t> bytes);
[[nodiscard]] BinaryMask read_mask(const std::filesystem::path& path);

[[nodiscard]] std::vector<std::uint8_t> encode_png(const RasterImage& image);
/// Single-channel PNG, foreground written as 255.
[[nodiscard]] std::vector<std::uint8_t> encode_png(const BinaryMask& mask);

void write_image(const std::filesystem::path& path, const RasterImage& image);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

[[nodiscard]] std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

// Standard base64 (with padding).
[[nodiscard]] std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws FormatError on invalid input.
[[nodiscard]] std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace clickseg
