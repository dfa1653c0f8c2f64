#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "guigaze/errors.hpp"

namespace guigaze {

/// A point in pixel space. Coordinates are real-valued; rasterization to
/// integer pixels happens only inside the image operations.
struct Point {
  double x = 0.0;
  double y = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline bool operator==(const Point& a, const Point& b) {
  return a.x == b.x && a.y == b.y;
}

/// Axis-aligned box, top-left (x1, y1) to bottom-right (x2, y2), in pixels.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double diagonal() const { return std::hypot(width(), height()); }
  Point center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }

  bool finite() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2);
  }
  bool valid() const { return finite() && x1 <= x2 && y1 <= y2; }

  /// Inclusive membership: boundary points count as inside.
  bool contains(const Point& p) const {
    return p.x >= x1 && p.x <= x2 && p.y >= y1 && p.y <= y2;
  }
};

inline bool operator==(const BBox& a, const BBox& b) {
  return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}

/// Intersection of two boxes; degenerate (zero-area) when they do not overlap.
inline BBox intersect(const BBox& a, const BBox& b) {
  BBox r{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
         std::min(a.y2, b.y2)};
  if (r.x1 > r.x2) r.x2 = r.x1;
  if (r.y1 > r.y2) r.y2 = r.y1;
  return r;
}

/// Intersection-over-union. Exposed as a diagnostic only; the coverage
/// measure used by the tool reward is coverage_fraction below.
inline double iou(const BBox& a, const BBox& b) {
  const double inter = intersect(a, b).area();
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct ImageDims {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }
};

enum class ToolKind { none, crop, zoom };

/// A visual tool action. Crop and zoom share the spatial parameters
/// (center + size); zoom additionally carries a resampling scale. The
/// no-tool case is kept in the same type so reward code can treat it as a
/// zero-size region.
struct ToolSpec {
  ToolKind kind = ToolKind::none;
  Point center;
  double width = 0.0;
  double height = 0.0;
  double scale = 1.0;  // zoom only

  static ToolSpec none() { return {}; }
  static ToolSpec crop(Point c, double w, double h) {
    return {ToolKind::crop, c, w, h, 1.0};
  }
  static ToolSpec zoom(Point c, double w, double h, double z) {
    return {ToolKind::zoom, c, w, h, z};
  }

  bool is_tool() const { return kind != ToolKind::none; }
};

/// Axis-aligned region of the requested size centered on the tool's center,
/// clamped to the image rectangle. Clamping (rather than rejection) keeps
/// every parsed tool action executable.
inline BBox crop_region(const ToolSpec& spec, const ImageDims& dims) {
  if (!spec.is_tool())
    throw contract_error("crop_region: no-tool spec has no region");
  if (!spec.center.finite() || !std::isfinite(spec.width) ||
      !std::isfinite(spec.height))
    throw invalid_input_error("crop_region: non-finite tool parameters");
  const double w = static_cast<double>(dims.width);
  const double h = static_cast<double>(dims.height);
  BBox r;
  r.x1 = std::clamp(spec.center.x - 0.5 * spec.width, 0.0, w);
  r.x2 = std::clamp(spec.center.x + 0.5 * spec.width, 0.0, w);
  r.y1 = std::clamp(spec.center.y - 0.5 * spec.height, 0.0, h);
  r.y2 = std::clamp(spec.center.y + 0.5 * spec.height, 0.0, h);
  return r;
}

/// Euclidean distance from c to the nearest point of the box; zero for
/// points inside or on the box (point-to-set distance).
inline double boundary_distance(const Point& c, const BBox& box) {
  if (!c.finite() || !box.finite())
    throw invalid_input_error("boundary_distance: non-finite input");
  const double dx = std::max({box.x1 - c.x, c.x - box.x2, 0.0});
  const double dy = std::max({box.y1 - c.y, c.y - box.y2, 0.0});
  return std::hypot(dx, dy);
}

/// Fraction of the ground-truth box covered by the crop region:
/// |crop ∩ gt| / |gt|, in [0, 1].
inline double coverage_fraction(const BBox& crop, const BBox& gt) {
  if (!(gt.area() > 0.0))
    throw degenerate_target_error("coverage_fraction: zero-area target box");
  return intersect(crop, gt).area() / gt.area();
}

/// Map a point expressed in crop-image coordinates (origin at the crop's
/// top-left corner) back to original-image coordinates.
inline Point map_from_crop(const Point& p_crop, const BBox& crop) {
  return {p_crop.x + crop.x1, p_crop.y + crop.y1};
}

/// Map a point expressed in zoomed-image coordinates back to original-image
/// coordinates: undo the resampling scale, then add the crop offset.
inline Point map_from_zoom(const Point& p_zoomed, const BBox& crop, double z) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw invalid_input_error("map_from_zoom: scale must be positive");
  return {p_zoomed.x / z + crop.x1, p_zoomed.y / z + crop.y1};
}

}  // namespace guigaze
