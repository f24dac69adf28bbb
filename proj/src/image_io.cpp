#include "echomi/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace echomi {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Skips whitespace and '#' comments between PGM header tokens.
int read_header_int(const std::vector<unsigned char>& bytes, std::size_t& pos,
                    const std::filesystem::path& path) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  long value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1 << 24) fail(ErrorCode::Io, "PGM header value too large in " + path.string());
    ++pos;
  }
  if (start == pos) fail(ErrorCode::Io, "malformed PGM header in " + path.string());
  return static_cast<int>(value);
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open image " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    fail(ErrorCode::Io, "not a binary PGM (P5) file: " + path.string());
  std::size_t pos = 2;
  const int width = read_header_int(bytes, pos, path);
  const int height = read_header_int(bytes, pos, path);
  const int maxval = read_header_int(bytes, pos, path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
    fail(ErrorCode::Io, "invalid PGM header in " + path.string());
  ++pos;  // single whitespace byte before the raster
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t needed = static_cast<std::size_t>(width) * height * bytes_per_sample;
  if (bytes.size() < pos + needed) fail(ErrorCode::Io, "truncated PGM raster in " + path.string());

  Image image(width, height);
  auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    unsigned sample = bytes[pos + i * bytes_per_sample];
    if (bytes_per_sample == 2) sample = (sample << 8) | bytes[pos + i * 2 + 1];
    px[i] = std::min(1.0, static_cast<double>(sample) / maxval);
  }
  return image;
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    fail(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    fail(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image image(static_cast<int>(png.width), static_cast<int>(png.height));
  auto px = image.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = buffer[i] / 255.0;
  return image;
}

void write_pgm_bytes(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

void write_png_bytes(const std::filesystem::path& path, int width, int height, png_uint_32 format,
                     const std::vector<std::uint8_t>& raster) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = format;
  if (!png_image_write_to_file(&png, path.c_str(), 0, raster.data(), 0, nullptr))
    fail(ErrorCode::Io, "cannot write PNG " + path.string() + ": " + png.message);
}

}  // namespace

std::uint8_t quantize(double value) {
  const double v = std::clamp(value, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(v));
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  fail(ErrorCode::Io, "unsupported image format: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> raster;
  raster.reserve(image.size());
  for (double v : image.pixels()) raster.push_back(quantize(v));
  write_pgm_bytes(path, image.width(), image.height(), raster);
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> raster;
  raster.reserve(mask.size());
  for (auto v : mask.pixels()) raster.push_back(v ? 255 : 0);
  write_pgm_bytes(path, mask.width(), mask.height(), raster);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> raster;
  raster.reserve(image.size());
  for (double v : image.pixels()) raster.push_back(quantize(v));
  write_png_bytes(path, image.width(), image.height(), PNG_FORMAT_GRAY, raster);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  std::vector<std::uint8_t> raster;
  raster.reserve(image.size() * 3);
  for (const auto& rgb : image.pixels()) raster.insert(raster.end(), rgb.begin(), rgb.end());
  write_png_bytes(path, image.width(), image.height(), PNG_FORMAT_RGB, raster);
}

}  // namespace echomi
