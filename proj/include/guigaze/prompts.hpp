#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>

#include "guigaze/geometry.hpp"

namespace guigaze {

/// Compact decimal rendering: 30.0 -> "30", 0.4 -> "0.4". Shortest string
/// that round-trips to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// The stage prompts are versioned text assets; assets/prompts/ carries the
// same bytes and a test keeps the two in sync.
inline constexpr std::string_view kStage1PromptV1 =
    R"(You are a GUI grounding agent looking at a full screenshot.
Instruction: {instruction}

Decide whether you need a closer look before answering. Reply with an
optional <think>...</think> block followed by exactly one action:
- answer directly with the pixel coordinates of the click target:
  <answer>{"point":[x,y]}</answer>
- crop a region to inspect it more closely:
  <tool_call>{"name":"crop","center":[x,y],"size":[w,h]}</tool_call>
- crop a region and magnify it by a zoom factor z:
  <tool_call>{"name":"zoom","center":[x,y],"size":[w,h],"scale":z}</tool_call>
All numbers must be finite decimals in pixel coordinates of the image you see.
)";

inline constexpr std::string_view kStage2PromptV1 =
    R"(You are a GUI grounding agent looking at a tool view of a screenshot: the
region at offset=({offset_x},{offset_y}) from the original image top-left,
shown at scale={scale}.
Instruction: {instruction}

Locate the click target in the image you see. Reply with an optional
<think>...</think> block followed by exactly one action:
  <answer>{"point":[x,y]}</answer>
where x and y are finite decimals in pixel coordinates of the image you see.
)";

/// Region + scale of the view handed to stage 2.
struct ToolMeta {
  BBox region;
  double scale = 1.0;
};

namespace detail {
inline void replace_all(std::string& text, std::string_view needle,
                        std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}
}  // namespace detail

/// Instantiate the stage template. Stage 2 states the crop offset and zoom
/// scale so the policy can answer in tool-image coordinates.
inline std::string render_prompt(int stage, const std::string& instruction,
                                 const std::optional<ToolMeta>& meta = {}) {
  if (stage != 1 && stage != 2)
    throw contract_error("render_prompt: stage must be 1 or 2");
  if (stage == 2 && !meta)
    throw contract_error("render_prompt: stage 2 requires tool metadata");
  std::string text(stage == 1 ? kStage1PromptV1 : kStage2PromptV1);
  detail::replace_all(text, "{instruction}", instruction);
  if (stage == 2) {
    detail::replace_all(text, "{offset_x}", format_number(meta->region.x1));
    detail::replace_all(text, "{offset_y}", format_number(meta->region.y1));
    detail::replace_all(text, "{scale}", format_number(meta->scale));
  }
  return text;
}

/// Recover offset/scale from a rendered stage-2 prompt. Scripted policies
/// use this the way a real model would read the prompt text.
inline std::optional<ToolMeta> parse_tool_meta(std::string_view prompt) {
  const auto off = prompt.find("offset=(");
  const auto sc = prompt.find("scale=");
  if (off == std::string_view::npos || sc == std::string_view::npos) return {};
  ToolMeta meta;
  double ox = 0, oy = 0, z = 1;
  const char* p = prompt.data() + off + 8;
  const char* end = prompt.data() + prompt.size();
  auto r1 = std::from_chars(p, end, ox);
  if (r1.ec != std::errc() || r1.ptr >= end || *r1.ptr != ',') return {};
  auto r2 = std::from_chars(r1.ptr + 1, end, oy);
  if (r2.ec != std::errc() || r2.ptr >= end || *r2.ptr != ')') return {};
  auto r3 = std::from_chars(prompt.data() + sc + 6, end, z);
  if (r3.ec != std::errc()) return {};
  meta.region = BBox{ox, oy, ox, oy};
  meta.scale = z;
  return meta;
}

/// Recover the instruction line from a rendered prompt.
inline std::optional<std::string> parse_instruction(std::string_view prompt) {
  constexpr std::string_view kTag = "Instruction: ";
  const auto pos = prompt.find(kTag);
  if (pos == std::string_view::npos) return {};
  const auto eol = prompt.find('\n', pos);
  const auto start = pos + kTag.size();
  return std::string(prompt.substr(start, eol - start));
}

}  // namespace guigaze
