#pragma once

#include <cstdint>
#include <vector>

#include "guigaze/geometry.hpp"

namespace guigaze {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

inline bool operator==(const Rgb& a, const Rgb& b) {
  return a.r == b.r && a.g == b.g && a.b == b.b;
}

/// 8-bit RGB image, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height bytes

  static Image filled(int w, int h, Rgb color) {
    Image img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(3) * w * h);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      img.pixels[i] = color.r;
      img.pixels[i + 1] = color.g;
      img.pixels[i + 2] = color.b;
    }
    return img;
  }

  ImageDims dims() const { return {width, height}; }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }

  Rgb at(int x, int y) const {
    const std::size_t o = offset(x, y);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }

  void set(int x, int y, Rgb c) {
    const std::size_t o = offset(x, y);
    pixels[o] = c.r;
    pixels[o + 1] = c.g;
    pixels[o + 2] = c.b;
  }
};

inline bool operator==(const Image& a, const Image& b) {
  return a.width == b.width && a.height == b.height && a.pixels == b.pixels;
}

/// Round half up: 0.5 -> 1, -0.5 -> 0.
inline long long round_half_up(double v) {
  return static_cast<long long>(std::floor(v + 0.5));
}

/// Copy the pixels of `region` into a new image. The region is intersected
/// with the image rectangle and rasterized with round-half-up; output dims
/// are the rounded region width x height.
inline Image crop_image(const Image& img, const BBox& region) {
  if (!region.finite()) throw invalid_input_error("crop_image: non-finite region");
  if (!region.valid()) throw invalid_input_error("crop_image: inverted region");
  BBox r = intersect(region, BBox{0.0, 0.0, static_cast<double>(img.width),
                                  static_cast<double>(img.height)});
  const long long ow = round_half_up(r.width());
  const long long oh = round_half_up(r.height());
  if (ow <= 0 || oh <= 0)
    throw empty_crop_error("crop_image: region rounds to zero pixels");
  long long ix = round_half_up(r.x1);
  long long iy = round_half_up(r.y1);
  // Rounding the start and the extent independently can overshoot the edge
  // by one pixel; shift the start back in.
  ix = std::clamp(ix, 0LL, static_cast<long long>(img.width) - ow);
  iy = std::clamp(iy, 0LL, static_cast<long long>(img.height) - oh);

  Image out;
  out.width = static_cast<int>(ow);
  out.height = static_cast<int>(oh);
  out.pixels.resize(static_cast<std::size_t>(3) * ow * oh);
  for (long long y = 0; y < oh; ++y) {
    const std::uint8_t* src = img.pixels.data() + img.offset(static_cast<int>(ix), static_cast<int>(iy + y));
    std::uint8_t* dst = out.pixels.data() + static_cast<std::size_t>(y) * ow * 3;
    std::copy(src, src + ow * 3, dst);
  }
  return out;
}

/// Bilinear resize to an explicit output size, half-pixel-center convention.
inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw invalid_input_error("resize_bilinear: output dims must be >= 1");
  if (out_w == img.width && out_h == img.height) return img;

  Image out;
  out.width = out_w;
  out.height = out_h;
  out.pixels.resize(static_cast<std::size_t>(3) * out_w * out_h);

  const double sx_ratio = static_cast<double>(img.width) / out_w;
  const double sy_ratio = static_cast<double>(img.height) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = (oy + 0.5) * sy_ratio - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = (ox + 0.5) * sx_ratio - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = sx - x0;
      const std::size_t o = out.offset(ox, oy);
      for (int c = 0; c < 3; ++c) {
        const double v00 = img.pixels[img.offset(x0, y0) + c];
        const double v10 = img.pixels[img.offset(x1, y0) + c];
        const double v01 = img.pixels[img.offset(x0, y1) + c];
        const double v11 = img.pixels[img.offset(x1, y1) + c];
        const double top = v00 + (v10 - v00) * tx;
        const double bot = v01 + (v11 - v01) * tx;
        const double v = top + (bot - top) * ty;
        out.pixels[o + c] = static_cast<std::uint8_t>(
            std::clamp<long long>(round_half_up(v), 0, 255));
      }
    }
  }
  return out;
}

/// Resample the whole image by scale z (bilinear). z = 1 is the identity.
inline Image zoom_image(const Image& img, double z) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw invalid_input_error("zoom_image: scale must be positive");
  const long long ow = round_half_up(z * img.width);
  const long long oh = round_half_up(z * img.height);
  if (ow < 1 || oh < 1)
    throw invalid_input_error("zoom_image: output dims round to zero");
  if (z == 1.0) return img;
  return resize_bilinear(img, static_cast<int>(ow), static_cast<int>(oh));
}

}  // namespace guigaze
