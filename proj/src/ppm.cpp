#include "tome/ppm.hpp"

#include <fstream>
#include <string>

namespace tome {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, std::size_t pos)
      : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int(const std::string& what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1 << 30) throw ParseError(what + " out of range", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError("expected " + what, pos_);
    }
    return static_cast<int>(value);
  }

  /// Exactly one whitespace byte separates the header from the raster.
  void expect_single_space(const std::string& what) {
    if (pos_ >= bytes_.size() ||
        (bytes_[pos_] != ' ' && bytes_[pos_] != '\n' && bytes_[pos_] != '\t' &&
         bytes_[pos_] != '\r')) {
      throw ParseError("expected whitespace after " + what, pos_);
    }
    ++pos_;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

PpmImage read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw ParseError("not a P6 PPM file", 0);
  }
  HeaderReader h(bytes, 2);
  PpmImage img;
  img.width = h.read_int("width");
  img.height = h.read_int("height");
  if (img.width < 1 || img.height < 1) {
    throw ParseError("zero image dimension", h.pos());
  }
  h.skip_space_and_comments();
  const std::size_t maxval_at = h.pos();
  const int maxval = h.read_int("maxval");
  if (maxval != 255) {
    throw ParseError("maxval must be 255, got " + std::to_string(maxval),
                     maxval_at);
  }
  h.expect_single_space("maxval");

  const std::size_t raster_bytes =
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3;
  if (bytes.size() - h.pos() < raster_bytes) {
    throw ParseError("raster truncated: expected " +
                     std::to_string(raster_bytes) + " bytes, found " +
                     std::to_string(bytes.size() - h.pos()),
                     bytes.size());
  }
  if (bytes.size() - h.pos() > raster_bytes) {
    throw ParseError("trailing bytes after raster", h.pos() + raster_bytes);
  }
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.pos()), bytes.end());
  return img;
}

void write_ppm(const PpmImage& image, const std::filesystem::path& path) {
  if (image.rgb.size() !=
      static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3) {
    throw std::invalid_argument("write_ppm: pixel buffer does not match dimensions");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "P6\n" << image.width << " " << image.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(image.rgb.data()),
          static_cast<std::streamsize>(image.rgb.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace tome
