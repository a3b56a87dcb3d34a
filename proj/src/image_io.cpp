#include "probout/image_io.hpp"

#include <cctype>

#include "probout/errors.hpp"
#include "probout/file_io.hpp"

namespace probout {

std::string encode_pnm(const PnmImage& image) {
  if (image.channels != 1 && image.channels != 3) throw FormatError("PNM images need 1 or 3 channels");
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw FormatError("PNM pixel buffer does not match its extents");
  }
  std::string out = image.channels == 1 ? "P5\n" : "P6\n";
  if (!image.comment.empty()) out += "# " + image.comment + "\n";
  out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(const std::string& in) : in_(in) {}

  std::size_t number(std::string* comment) {
    skip(comment);
    if (pos_ >= in_.size() || !std::isdigit(static_cast<unsigned char>(in_[pos_]))) {
      throw FormatError("PNM header: expected a number");
    }
    std::size_t v = 0;
    while (pos_ < in_.size() && std::isdigit(static_cast<unsigned char>(in_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(in_[pos_++] - '0');
      if (v > (1u << 24)) throw FormatError("PNM header: value too large");
    }
    return v;
  }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip(std::string* comment) {
    while (pos_ < in_.size()) {
      if (std::isspace(static_cast<unsigned char>(in_[pos_]))) {
        ++pos_;
      } else if (in_[pos_] == '#') {
        const std::size_t end = in_.find('\n', pos_);
        std::string text = in_.substr(pos_ + 1, end == std::string::npos ? std::string::npos : end - pos_ - 1);
        if (!text.empty() && text.front() == ' ') text.erase(0, 1);
        if (comment && comment->empty()) *comment = text;
        pos_ = end == std::string::npos ? in_.size() : end + 1;
      } else {
        break;
      }
    }
  }

  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

PnmImage decode_pnm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file");
  }
  PnmImage image;
  image.channels = bytes[1] == '5' ? 1 : 3;
  HeaderParser header(bytes);
  header.advance(2);
  image.width = header.number(&image.comment);
  image.height = header.number(&image.comment);
  const std::size_t maxval = header.number(&image.comment);
  if (maxval != 255) throw FormatError("only 8-bit PNM files are supported");
  header.advance(1);  // single whitespace byte before the raster
  const std::size_t n = image.width * image.height * image.channels;
  if (header.pos() > bytes.size() || bytes.size() - header.pos() < n) throw FormatError("PNM raster truncated");
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header.pos()),
                      bytes.begin() + static_cast<std::ptrdiff_t>(header.pos() + n));
  return image;
}

void write_pnm(const std::string& path, const PnmImage& image) { write_file(path, encode_pnm(image)); }

PnmImage read_pnm(const std::string& path) { return decode_pnm(read_file(path)); }

}  // namespace probout
