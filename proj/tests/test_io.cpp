#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tome/ppm.hpp"
#include "tome/rng.hpp"

using namespace tome;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("ppm round trip") {
  PpmImage img;
  img.width = 5;
  img.height = 3;
  img.rgb.resize(45);
  Rng rng(1);
  for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng.bounded(256));

  const auto path = temp_file("tome_test.ppm");
  write_ppm(img, path);
  const auto back = read_ppm(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.rgb == img.rgb);
  fs::remove(path);
}

TEST_CASE("ppm accepts header comments") {
  const auto path = temp_file("tome_test_comment.ppm");
  std::string bytes = "P6\n# a comment\n2 1\n# another\n255\n";
  bytes += std::string(6, '\x7f');
  write_bytes(path, bytes);
  const auto img = read_ppm(path);
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.rgb == std::vector<std::uint8_t>(6, 0x7f));
  fs::remove(path);
}

TEST_CASE("ppm parse errors carry byte offsets") {
  const auto path = temp_file("tome_test_bad.ppm");

  SUBCASE("wrong magic") {
    write_bytes(path, "P5\n2 2\n255\n" + std::string(12, 'x'));
    try {
      read_ppm(path);
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("unsupported maxval") {
    write_bytes(path, "P6\n2 1\n65535\n" + std::string(12, 'x'));
    try {
      read_ppm(path);
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 7);
      CHECK(std::string(e.what()).find("maxval") != std::string::npos);
    }
  }
  SUBCASE("truncated raster") {
    write_bytes(path, "P6\n2 2\n255\n" + std::string(5, 'x'));
    CHECK_THROWS_AS(read_ppm(path), ParseError);
  }
  SUBCASE("missing dimensions") {
    write_bytes(path, "P6\nno-numbers");
    CHECK_THROWS_AS(read_ppm(path), ParseError);
  }
  fs::remove(path);
}
