#pragma once

#include <string>
#include <utility>

#include "guigaze/protocol.hpp"
#include "guigaze/synthetic.hpp"
#include "guigaze/toy_policy.hpp"

namespace guigaze {

/// Emits the given raw text at every stage. Handy for driving the episode
/// state machine through malformed outputs.
inline PolicyFn scripted_raw_policy(std::string raw) {
  return [raw = std::move(raw)](int, const std::string&, const Image&,
                                Rng&) { return raw; };
}

/// Answers a fixed point given in original-image coordinates. At stage 2 the
/// point is converted into tool-view coordinates using the offset and scale
/// stated in the prompt, the same way a real model would read them.
inline PolicyFn scripted_fixed_point_policy(Point p_original) {
  return [p_original](int stage, const std::string& prompt, const Image&,
                      Rng&) {
    Point p = p_original;
    if (stage == 2) {
      if (const auto meta = parse_tool_meta(prompt)) {
        p.x = (p_original.x - meta->region.x1) * meta->scale;
        p.y = (p_original.y - meta->region.y1) * meta->scale;
      }
    }
    return make_answer_text(p);
  };
}

/// Answers the center of whatever image it is shown.
inline PolicyFn scripted_center_policy() {
  return [](int, const std::string&, const Image& view, Rng&) {
    return make_answer_text({view.width / 2.0, view.height / 2.0});
  };
}

/// Stage 1 emits the given tool call; stage 2 answers a fixed original-image
/// point converted through the prompt's offset/scale.
inline PolicyFn scripted_tool_then_point_policy(const ToolSpec& tool,
                                                Point p_original) {
  PolicyFn answerer = scripted_fixed_point_policy(p_original);
  return [tool, answerer](int stage, const std::string& prompt,
                          const Image& view, Rng& rng) {
    if (stage == 1) {
      if (tool.kind == ToolKind::zoom)
        return make_zoom_text(tool.center, tool.width, tool.height, tool.scale);
      return make_crop_text(tool.center, tool.width, tool.height);
    }
    return answerer(stage, prompt, view, rng);
  };
}

/// Finds pixels of the given palette color in the visible image and answers
/// the center of the grid cell containing their centroid. Its precision is
/// limited by the cell pitch of the *visible* image, so it benefits from
/// being handed a tighter crop.
inline PolicyFn scripted_snap_policy(int color_id, int grid) {
  return [color_id, grid](int, const std::string&, const Image& view, Rng&) {
    const Rgb want = palette()[color_id].rgb;
    long long sx = 0, sy = 0, count = 0;
    for (int y = 0; y < view.height; ++y)
      for (int x = 0; x < view.width; ++x)
        if (view.at(x, y) == want) {
          sx += x;
          sy += y;
          ++count;
        }
    Point p{view.width / 2.0, view.height / 2.0};
    if (count > 0) {
      const double cx = static_cast<double>(sx) / count + 0.5;
      const double cy = static_cast<double>(sy) / count + 0.5;
      const int cell_x = std::clamp(
          static_cast<int>(cx * grid / view.width), 0, grid - 1);
      const int cell_y = std::clamp(
          static_cast<int>(cy * grid / view.height), 0, grid - 1);
      p = cell_center(cell_y * grid + cell_x, view.dims(), grid);
    }
    return make_answer_text(p);
  };
}

/// Always throws a transport error. Exercises the episode-error path.
inline PolicyFn scripted_failing_policy(std::string message) {
  return [message = std::move(message)](int, const std::string&, const Image&,
                                        Rng&) -> std::string {
    throw policy_transport_error(message);
  };
}

}  // namespace guigaze
