#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "guigaze/image.hpp"
#include "guigaze/rng.hpp"

namespace guigaze {

struct PaletteColor {
  const char* name;
  Rgb rgb;
};

/// Element colors for synthetic screens. Names are single distinct words so
/// instructions can be parsed back unambiguously.
inline const std::array<PaletteColor, 8>& palette() {
  static const std::array<PaletteColor, 8> colors{{
      {"red", {204, 51, 51}},
      {"green", {51, 170, 68}},
      {"blue", {51, 102, 221}},
      {"yellow", {221, 204, 34}},
      {"magenta", {204, 68, 204}},
      {"cyan", {68, 204, 204}},
      {"orange", {230, 140, 30}},
      {"violet", {136, 68, 221}},
  }};
  return colors;
}

inline constexpr Rgb kScreenBackground{28, 28, 32};

struct ScreenElement {
  BBox bbox;
  int color_id = 0;
  bool is_target = false;
};

/// A desk-scale stand-in for a GUI screenshot: disjoint solid-color
/// rectangles on a dark background, one of which is the instruction target.
struct SyntheticScreen {
  ImageDims dims;
  std::vector<ScreenElement> elements;
  std::string instruction;
  BBox gt;
};

struct ScreenConfig {
  ImageDims dims{128, 128};
  int n_elements = 3;
  int grid = 8;  // feature grid used by the toy policy
  double min_element_frac = 0.08;
  double max_element_frac = 0.22;
};

/// Deterministic screen generation: pure function of (seed, config).
/// Elements are integer-aligned, pairwise disjoint, and colored with
/// distinct palette entries; exactly one is the target.
inline SyntheticScreen generate_screen(std::uint64_t seed,
                                       const ScreenConfig& cfg) {
  if (cfg.n_elements < 1)
    throw invalid_input_error("generate_screen: need at least one element");
  if (cfg.n_elements > static_cast<int>(palette().size()))
    throw invalid_input_error("generate_screen: more elements than palette colors");

  Rng rng(derive_seed(seed, 0x5c12ee7));
  SyntheticScreen screen;
  screen.dims = cfg.dims;

  const double min_w = cfg.min_element_frac * cfg.dims.width;
  const double max_w = cfg.max_element_frac * cfg.dims.width;
  const double min_h = cfg.min_element_frac * cfg.dims.height;
  const double max_h = cfg.max_element_frac * cfg.dims.height;

  // Distinct colors per screen, order shuffled by the seed.
  std::vector<int> color_ids(palette().size());
  for (std::size_t i = 0; i < color_ids.size(); ++i) color_ids[i] = static_cast<int>(i);
  for (std::size_t i = color_ids.size() - 1; i > 0; --i)
    std::swap(color_ids[i], color_ids[rng.uniform_int(0, static_cast<std::int64_t>(i))]);

  constexpr int kMaxAttempts = 200;
  for (int e = 0; e < cfg.n_elements; ++e) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const int w = std::max(2, static_cast<int>(rng.uniform(min_w, max_w)));
      const int h = std::max(2, static_cast<int>(rng.uniform(min_h, max_h)));
      if (w >= cfg.dims.width || h >= cfg.dims.height) continue;
      const int x = static_cast<int>(rng.uniform_int(0, cfg.dims.width - w));
      const int y = static_cast<int>(rng.uniform_int(0, cfg.dims.height - h));
      BBox candidate{static_cast<double>(x), static_cast<double>(y),
                     static_cast<double>(x + w), static_cast<double>(y + h)};
      bool overlaps = false;
      for (const auto& other : screen.elements) {
        // Keep a 2px gap so neighboring elements stay visually separate.
        BBox inflated{other.bbox.x1 - 2, other.bbox.y1 - 2, other.bbox.x2 + 2,
                      other.bbox.y2 + 2};
        if (intersect(candidate, inflated).area() > 0.0) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      screen.elements.push_back({candidate, color_ids[e], false});
      placed = true;
    }
    if (!placed)
      throw generation_error("generate_screen: could not place element " +
                             std::to_string(e));
  }

  const int target_index =
      static_cast<int>(rng.uniform_int(0, cfg.n_elements - 1));
  screen.elements[target_index].is_target = true;
  screen.gt = screen.elements[target_index].bbox;
  screen.instruction =
      std::string("click the ") +
      palette()[screen.elements[target_index].color_id].name + " box";
  return screen;
}

inline Image render_screen(const SyntheticScreen& screen) {
  Image img = Image::filled(screen.dims.width, screen.dims.height,
                            kScreenBackground);
  for (const auto& el : screen.elements) {
    const Rgb c = palette()[el.color_id].rgb;
    const int x1 = static_cast<int>(el.bbox.x1);
    const int y1 = static_cast<int>(el.bbox.y1);
    const int x2 = static_cast<int>(el.bbox.x2);
    const int y2 = static_cast<int>(el.bbox.y2);
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) img.set(x, y, c);
  }
  return img;
}

/// Palette color id named in an instruction, if any.
inline std::optional<int> target_color_from_instruction(
    const std::string& instruction) {
  for (std::size_t i = 0; i < palette().size(); ++i) {
    const std::string needle = std::string(" ") + palette()[i].name + " ";
    if ((" " + instruction + " ").find(needle) != std::string::npos)
      return static_cast<int>(i);
  }
  return {};
}

/// Center of grid cell `cell` (row-major) of a G x G grid over `dims`.
inline Point cell_center(int cell, const ImageDims& dims, int grid) {
  const int cx = cell % grid;
  const int cy = cell / grid;
  return {(cx + 0.5) * dims.width / grid, (cy + 0.5) * dims.height / grid};
}

/// Per-cell target-color indicator features over a G x G grid: feature m is
/// 1 when any pixel of cell m matches the palette color exactly.
inline std::vector<double> cell_features(const Image& img, int color_id,
                                         int grid) {
  const Rgb want = palette()[color_id].rgb;
  std::vector<double> features(static_cast<std::size_t>(grid) * grid, 0.0);
  for (int cy = 0; cy < grid; ++cy) {
    const int y0 = cy * img.height / grid;
    const int y1 = (cy + 1) * img.height / grid;
    for (int cx = 0; cx < grid; ++cx) {
      const int x0 = cx * img.width / grid;
      const int x1 = (cx + 1) * img.width / grid;
      bool hit = false;
      for (int y = y0; y < y1 && !hit; ++y)
        for (int x = x0; x < x1 && !hit; ++x)
          if (img.at(x, y) == want) hit = true;
      features[static_cast<std::size_t>(cy) * grid + cx] = hit ? 1.0 : 0.0;
    }
  }
  return features;
}

}  // namespace guigaze
