#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace probout {

/// 8-bit binary PGM (channels == 1) or PPM (channels == 3).
struct PnmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved channels
  std::string comment;               // single line, without the leading '#'

  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
};

std::string encode_pnm(const PnmImage& image);
PnmImage decode_pnm(const std::string& bytes);

void write_pnm(const std::string& path, const PnmImage& image);
PnmImage read_pnm(const std::string& path);

}  // namespace probout
