#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace artgan::data {

// 8-bit RGB raster, interleaved, row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

// Binary PPM: "P6\n<w> <h>\n255\n" followed by 3*w*h bytes. The reader also
// accepts arbitrary whitespace and '#' comments in the header.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// [0, 1] -> byte with round-to-nearest; values outside are clamped.
std::uint8_t quantize(double value) noexcept;

}  // namespace artgan::data
