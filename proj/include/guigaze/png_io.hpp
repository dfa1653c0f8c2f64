#pragma once

#include <png.h>

#include <cstring>
#include <string>
#include <vector>

#include "guigaze/image.hpp"

namespace guigaze {

/// Read a PNG as 8-bit RGB. Images with an alpha channel are flattened over
/// a white background with plain byte-space blending.
inline Image read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw image_io_error("read_png: " + path + ": " + png.message);

  png.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, rgba.data(), 0, nullptr)) {
    png_image_free(&png);
    throw image_io_error("read_png: " + path + ": " + png.message);
  }

  Image img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.pixels.resize(static_cast<std::size_t>(3) * img.width * img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = rgba.data() + i * 4;
    std::uint8_t* dst = img.pixels.data() + i * 3;
    const unsigned a = src[3];
    for (int c = 0; c < 3; ++c)
      dst[c] = static_cast<std::uint8_t>((a * src[c] + (255 - a) * 255 + 127) / 255);
  }
  return img;
}

/// Read only the dimensions (decodes the header, not the pixel data).
inline ImageDims read_png_dims(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw image_io_error("read_png_dims: " + path + ": " + png.message);
  ImageDims dims{static_cast<int>(png.width), static_cast<int>(png.height)};
  png_image_free(&png);
  return dims;
}

inline void write_png(const std::string& path, const Image& img) {
  if (!img.dims().valid() ||
      img.pixels.size() != static_cast<std::size_t>(3) * img.width * img.height)
    throw image_io_error("write_png: malformed image buffer");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0,
                               nullptr))
    throw image_io_error("write_png: " + path + ": " + png.message);
}

/// Encode to an in-memory PNG byte buffer (for wire transport).
inline std::vector<std::uint8_t> encode_png(const Image& img) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.pixels.data(), 0,
                                 nullptr))
    throw image_io_error(std::string("encode_png: ") + png.message);
  std::vector<std::uint8_t> buf(size);
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_memory(&png, buf.data(), &size, 0, img.pixels.data(),
                                 0, nullptr))
    throw image_io_error(std::string("encode_png: ") + png.message);
  buf.resize(size);
  return buf;
}

}  // namespace guigaze
