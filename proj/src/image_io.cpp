#include "artgan/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "artgan/error.hpp"

namespace artgan::data {
namespace {

// Next header token, skipping whitespace and comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  if (token.empty()) throw IoError(path.string() + ": truncated PPM header");
  return token;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string t = header_token(in, path);
  if (t.empty() || !std::all_of(t.begin(), t.end(), ::isdigit) || t.size() > 9) {
    throw IoError(path.string() + ": bad PPM header field '" + t + "'");
  }
  return std::stoul(t);
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (header_token(in, path) != "P6") {
    throw IoError(path.string() + ": not a binary PPM (P6) file");
  }
  RgbImage img;
  img.width = header_number(in, path);
  img.height = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (img.width == 0 || img.height == 0 || maxval != 255) {
    throw IoError(path.string() + ": unsupported PPM geometry or maxval");
  }
  img.pixels.resize(3 * img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    throw IoError(path.string() + ": truncated PPM pixel data");
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  if (image.pixels.size() != 3 * image.width * image.height) {
    throw IoError("write_ppm: pixel buffer does not match " +
                  std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::uint8_t quantize(double value) noexcept {
  if (std::isnan(value)) return 0;
  const double v = std::clamp(value, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace artgan::data
