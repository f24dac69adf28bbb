#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "echomi/image.hpp"

namespace echomi {

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Grid<Rgb>;

/// 8-bit quantization used for every frame written to disk.
std::uint8_t quantize(double value);

/// Reads an 8-bit (or 16-bit) grayscale PGM (P5) or a PNG and normalizes the
/// samples to [0, 1]. Color PNGs are converted to luminance.
Image read_image(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Image& image);
void write_pgm(const std::filesystem::path& path, const Mask& mask);
void write_png(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace echomi
