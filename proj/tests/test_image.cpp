#include "guigaze/image.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "guigaze/png_io.hpp"
#include "guigaze/rng.hpp"

using namespace guigaze;

namespace {

Image checkerboard4x4() {
  Image img = Image::filled(4, 4, {0, 0, 0});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      if ((x + y) % 2 == 0) img.set(x, y, {255, 255, 255});
  return img;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("round_half_up") {
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(-0.5) == 0);
  CHECK(round_half_up(2.49) == 2);
  CHECK(round_half_up(2.5) == 3);
}

TEST_CASE("crop_image: full region is the identity") {
  const Image img = checkerboard4x4();
  CHECK(crop_image(img, BBox{0, 0, 4, 4}) == img);
}

TEST_CASE("crop_image: checkerboard sub-buffer") {
  const Image img = checkerboard4x4();
  const Image out = crop_image(img, BBox{1, 1, 3, 3});
  REQUIRE(out.width == 2);
  REQUIRE(out.height == 2);
  // Index-arithmetic oracle: pixel (x,y) of the crop equals (x+1, y+1).
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) REQUIRE(out.at(x, y) == img.at(x + 1, y + 1));
}

TEST_CASE("crop_image: single pixel") {
  const Image img = checkerboard4x4();
  const Image out = crop_image(img, BBox{0, 0, 1, 1});
  REQUIRE(out.width == 1);
  REQUIRE(out.height == 1);
  CHECK(out.at(0, 0) == img.at(0, 0));
}

TEST_CASE("crop_image: zero-area region is an error") {
  const Image img = checkerboard4x4();
  CHECK_THROWS_AS(crop_image(img, BBox{2, 2, 2, 2}), empty_crop_error);
  CHECK_THROWS_AS(crop_image(img, BBox{1, 1, 1.2, 3}), empty_crop_error);
}

TEST_CASE("crop_image: fractional region stays in bounds") {
  const Image img = checkerboard4x4();
  // Start rounds to 1, extent rounds to 4; the copy must shift back in.
  const Image out = crop_image(img, BBox{0.5, 0.0, 4.0, 4.0});
  REQUIRE(out.width == 4);
  REQUIRE(out.height == 4);
  CHECK(out == img);
}

TEST_CASE("zoom_image: z=1 is byte-identical") {
  const Image img = checkerboard4x4();
  CHECK(zoom_image(img, 1.0) == img);
}

TEST_CASE("zoom_image: constants interpolate to constants") {
  const Image img = Image::filled(4, 4, {77, 77, 77});
  const Image out = zoom_image(img, 2.0);
  REQUIRE(out.width == 8);
  REQUIRE(out.height == 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) REQUIRE(out.at(x, y) == Rgb{77, 77, 77});
}

TEST_CASE("zoom_image: bilinear interior values on a 2x1 ramp") {
  Image img = Image::filled(2, 1, {0, 0, 0});
  img.set(1, 0, {255, 255, 255});
  const Image out = zoom_image(img, 2.0);
  REQUIRE(out.width == 4);
  REQUIRE(out.height == 2);
  // Closed-form oracle: sample at sx = (ox + 0.5)/2 - 0.5, linear between 0
  // and 255, round half up.
  for (int ox = 0; ox < 4; ++ox) {
    const double sx = std::clamp((ox + 0.5) * 0.5 - 0.5, 0.0, 1.0);
    const double expected = 255.0 * sx;
    const int v = out.at(ox, 0).r;
    REQUIRE(v == static_cast<int>(round_half_up(expected)));
  }
  CHECK(out.at(1, 0).r > 0);
  CHECK(out.at(1, 0).r < 255);
  CHECK(out.at(2, 0).r > 0);
  CHECK(out.at(2, 0).r < 255);
}

TEST_CASE("zoom_image: invalid scales") {
  const Image img = checkerboard4x4();
  CHECK_THROWS_AS(zoom_image(img, 0.0), invalid_input_error);
  CHECK_THROWS_AS(zoom_image(img, -1.0), invalid_input_error);
  CHECK_THROWS_AS(zoom_image(img, 0.01), invalid_input_error);  // rounds to 0
}

TEST_CASE("png: write/read round trip") {
  const auto path = temp_file("guigaze_roundtrip.png");
  Image img = Image::filled(9, 5, {10, 200, 30});
  img.set(3, 2, {255, 0, 0});
  img.set(8, 4, {1, 2, 3});
  write_png(path.string(), img);
  const Image back = read_png(path.string());
  CHECK(back == img);
  const ImageDims dims = read_png_dims(path.string());
  CHECK(dims.width == 9);
  CHECK(dims.height == 5);
  std::filesystem::remove(path);
}

TEST_CASE("png: alpha is flattened over white") {
  // Write an RGBA png with libpng directly, then read it back through the
  // library's RGB-only reader.
  const auto path = temp_file("guigaze_alpha.png");
  {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = 2;
    png.height = 1;
    png.format = PNG_FORMAT_RGBA;
    // Pixel 0: opaque red. Pixel 1: half-transparent black.
    const std::uint8_t pixels[8] = {255, 0, 0, 255, 0, 0, 0, 128};
    REQUIRE(png_image_write_to_file(&png, path.string().c_str(), 0, pixels, 0,
                                    nullptr) != 0);
  }
  const Image img = read_png(path.string());
  REQUIRE(img.width == 2);
  CHECK(img.at(0, 0) == Rgb{255, 0, 0});
  // Half-transparent black over white lands mid-gray.
  CHECK(std::abs(img.at(1, 0).r - 127) <= 1);
  CHECK(img.at(1, 0).r == img.at(1, 0).g);
  CHECK(img.at(1, 0).g == img.at(1, 0).b);
  std::filesystem::remove(path);
}

TEST_CASE("png: missing file raises image_io_error") {
  CHECK_THROWS_AS(read_png("/nonexistent/nope.png"), image_io_error);
  CHECK_THROWS_AS(read_png_dims("/nonexistent/nope.png"), image_io_error);
}

TEST_CASE("encode_png: in-memory bytes decode back") {
  Image img = Image::filled(6, 4, {9, 8, 7});
  img.set(5, 3, {200, 100, 50});
  const auto bytes = encode_png(img);
  REQUIRE(bytes.size() > 8);
  // PNG signature.
  CHECK(bytes[0] == 0x89);
  CHECK(bytes[1] == 'P');
  const auto path = temp_file("guigaze_mem.png");
  {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f);
    std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
  }
  CHECK(read_png(path.string()) == img);
  std::filesystem::remove(path);
}
