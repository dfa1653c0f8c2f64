#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "guigaze/image.hpp"
#include "guigaze/prompts.hpp"
#include "guigaze/reward.hpp"
#include "guigaze/rng.hpp"

namespace guigaze {

enum class FormatErrorReason {
  unclosed_tag,
  bad_payload,
  wrong_stage_action,
  non_finite_number,
};

inline std::string to_string(FormatErrorReason r) {
  switch (r) {
    case FormatErrorReason::unclosed_tag: return "UnclosedTag";
    case FormatErrorReason::bad_payload: return "BadPayload";
    case FormatErrorReason::wrong_stage_action: return "WrongStageAction";
    case FormatErrorReason::non_finite_number: return "NonFiniteNumber";
  }
  return "BadPayload";
}

struct FormatError {
  FormatErrorReason reason = FormatErrorReason::bad_payload;
  std::string detail;
};

enum class ActionKind { tool_call, answer };

/// One parsed stage output: optional free-form think text plus exactly one
/// action payload.
struct Action {
  ActionKind kind = ActionKind::answer;
  std::string think;
  ToolSpec tool;   // tool_call only
  Point point;     // answer only
};

struct ParseResult {
  std::optional<Action> action;
  std::optional<FormatError> error;

  bool ok() const { return action.has_value(); }

  static ParseResult fail(FormatErrorReason reason, std::string detail) {
    ParseResult r;
    r.error = FormatError{reason, std::move(detail)};
    return r;
  }
};

namespace detail {

inline std::string_view strip_ws(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\n' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\n' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

/// Parse a JSON payload. Number overflow ("1e999") surfaces as
/// NonFiniteNumber; any other parse failure as BadPayload.
inline std::optional<nlohmann::json> parse_payload_json(
    std::string_view payload, FormatErrorReason& reason) {
  try {
    return nlohmann::json::parse(payload);
  } catch (const nlohmann::json::out_of_range&) {
    reason = FormatErrorReason::non_finite_number;
    return {};
  } catch (const nlohmann::json::exception&) {
    reason = FormatErrorReason::bad_payload;
    return {};
  }
}

/// Extract a finite double from a JSON value; nullopt is reported by the
/// caller as BadPayload vs NonFiniteNumber via `non_finite`.
inline std::optional<double> json_number(const nlohmann::json& v,
                                         bool& non_finite) {
  if (!v.is_number()) return {};
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    non_finite = true;
    return {};
  }
  return d;
}

inline std::optional<Point> json_point_pair(const nlohmann::json& v,
                                            bool& non_finite) {
  if (!v.is_array() || v.size() != 2) return {};
  const auto x = json_number(v[0], non_finite);
  const auto y = json_number(v[1], non_finite);
  if (!x || !y) return {};
  return Point{*x, *y};
}

inline ParseResult parse_tool_payload(std::string_view payload) {
  FormatErrorReason parse_reason = FormatErrorReason::bad_payload;
  const auto parsed = parse_payload_json(payload, parse_reason);
  if (!parsed)
    return ParseResult::fail(parse_reason, "tool_call payload does not parse");
  const nlohmann::json& j = *parsed;
  if (!j.is_object())
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "tool_call payload is not a JSON object");
  const auto name_it = j.find("name");
  if (name_it == j.end() || !name_it->is_string())
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "tool_call payload missing string `name`");
  const std::string name = name_it->get<std::string>();
  const bool is_zoom = name == "zoom";
  if (!is_zoom && name != "crop")
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "unknown tool name: " + name);
  const std::size_t expected_keys = is_zoom ? 4 : 3;
  if (j.size() != expected_keys || j.find("center") == j.end() ||
      j.find("size") == j.end() || (is_zoom && j.find("scale") == j.end()))
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "tool_call payload has wrong keys");

  bool non_finite = false;
  const auto center = json_point_pair(j["center"], non_finite);
  const auto size = json_point_pair(j["size"], non_finite);
  std::optional<double> scale;
  if (is_zoom) scale = json_number(j["scale"], non_finite);
  if (non_finite)
    return ParseResult::fail(FormatErrorReason::non_finite_number,
                             "tool_call payload has a non-finite number");
  if (!center || !size || (is_zoom && !scale))
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "tool_call payload fields have wrong types");
  if (size->x < 0.0 || size->y < 0.0)
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "tool size must be non-negative");
  if (is_zoom && !(*scale > 0.0))
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "zoom scale must be positive");

  ParseResult r;
  r.action = Action{};
  r.action->kind = ActionKind::tool_call;
  r.action->tool = is_zoom
                       ? ToolSpec::zoom(*center, size->x, size->y, *scale)
                       : ToolSpec::crop(*center, size->x, size->y);
  return r;
}

inline ParseResult parse_answer_payload(std::string_view payload) {
  FormatErrorReason parse_reason = FormatErrorReason::bad_payload;
  const auto parsed = parse_payload_json(payload, parse_reason);
  if (!parsed)
    return ParseResult::fail(parse_reason, "answer payload does not parse");
  const nlohmann::json& j = *parsed;
  if (!j.is_object() || j.size() != 1 || j.find("point") == j.end())
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "answer payload must be {\"point\":[x,y]}");
  bool non_finite = false;
  const auto p = json_point_pair(j["point"], non_finite);
  if (non_finite)
    return ParseResult::fail(FormatErrorReason::non_finite_number,
                             "answer point has a non-finite number");
  if (!p)
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "answer point must be two numbers");
  ParseResult r;
  r.action = Action{};
  r.action->kind = ActionKind::answer;
  r.action->point = *p;
  return r;
}

}  // namespace detail

/// Parse one stage output. The accepted grammar is exactly
///
///   [ <think> ... </think> ]
///   <tool_call>{"name":"crop"|"zoom","center":[x,y],"size":[w,h],"scale":z?}</tool_call>
///   | <answer>{"point":[x,y]}</answer>
///
/// with optional surrounding whitespace, scale required iff name is "zoom",
/// and tool calls legal only at stage 1. Total: any byte string maps to an
/// Action or a FormatError, never an exception.
inline ParseResult parse_action(std::string_view raw, int stage) {
  std::string_view s = detail::strip_ws(raw);

  std::string think;
  if (s.starts_with("<think>")) {
    const auto close = s.find("</think>");
    if (close == std::string_view::npos)
      return ParseResult::fail(FormatErrorReason::unclosed_tag,
                               "<think> is never closed");
    think = std::string(s.substr(7, close - 7));
    s = detail::strip_ws(s.substr(close + 8));
  }

  ParseResult result;
  if (s.starts_with("<tool_call>")) {
    if (stage != 1)
      return ParseResult::fail(FormatErrorReason::wrong_stage_action,
                               "tool calls are only legal at stage 1");
    const auto close = s.find("</tool_call>");
    if (close == std::string_view::npos)
      return ParseResult::fail(FormatErrorReason::unclosed_tag,
                               "<tool_call> is never closed");
    result = detail::parse_tool_payload(s.substr(11, close - 11));
    s = detail::strip_ws(s.substr(close + 12));
  } else if (s.starts_with("<answer>")) {
    const auto close = s.find("</answer>");
    if (close == std::string_view::npos)
      return ParseResult::fail(FormatErrorReason::unclosed_tag,
                               "<answer> is never closed");
    result = detail::parse_answer_payload(s.substr(8, close - 8));
    s = detail::strip_ws(s.substr(close + 9));
  } else {
    return ParseResult::fail(FormatErrorReason::bad_payload,
                             "expected a <tool_call> or <answer> action");
  }

  if (result.ok()) {
    if (!s.empty())
      return ParseResult::fail(FormatErrorReason::bad_payload,
                               "trailing text after the action tag");
    result.action->think = std::move(think);
  }
  return result;
}

/// A policy is anything that maps (stage, prompt, visible image) to raw
/// output text. Throw policy_transport_error for delivery failures; those
/// abort the episode instead of scoring it as malformed.
using PolicyFn = std::function<std::string(
    int stage, const std::string& prompt, const Image& view, Rng& rng)>;

struct EpisodeOptions {
  RewardWeights weights;
  RewardVariant variant = RewardVariant::full;
  // Upper bound on tool-view pixels; a zoom that blows past it is treated
  // as an invalid action rather than allocated.
  long long max_tool_pixels = 1LL << 24;
};

/// One complete rollout: raw texts, parsed actions, tool geometry, the final
/// click mapped back to original-image coordinates, and the reward breakdown.
struct EpisodeRecord {
  std::string instruction;
  std::string image_ref;
  ImageDims image_dims;

  int step_count = 1;
  std::string stage1_raw;
  std::optional<Action> stage1_action;
  std::optional<FormatError> stage1_error;
  std::optional<std::string> stage2_raw;
  std::optional<Action> stage2_action;
  std::optional<FormatError> stage2_error;

  std::optional<BBox> tool_region;
  std::optional<double> zoom_scale;
  std::optional<std::string> invalid_action;  // parsed but unexecutable tool

  TrajectoryOutcome outcome;
  RewardBreakdown reward;

  std::optional<std::string> episode_error;  // transport failure, not format
};

/// Execute the two-stage rollout state machine against a policy.
///
/// Stage 1 sees the original image; a direct answer ends the episode, a tool
/// call produces the cropped/zoomed view for stage 2 and the stage-2 answer
/// is mapped back to original coordinates. Any format error terminates the
/// episode with format_ok = false and a zero reward.
inline EpisodeRecord run_episode(const PolicyFn& policy,
                                 const std::string& instruction,
                                 const Image& image, const BBox& gt,
                                 std::uint64_t seed,
                                 const EpisodeOptions& opts = {},
                                 const std::string& image_ref = "") {
  if (!image.dims().valid())
    throw invalid_input_error("run_episode: empty image");
  if (!gt.valid() || !(gt.area() > 0.0))
    throw degenerate_target_error("run_episode: ground-truth box is degenerate");

  EpisodeRecord rec;
  rec.instruction = instruction;
  rec.image_ref = image_ref;
  rec.image_dims = image.dims();
  rec.outcome.gt = gt;

  Rng rng(seed);
  const auto finalize = [&]() -> EpisodeRecord& {
    rec.reward = total_reward(rec.outcome, opts.weights, opts.variant);
    return rec;
  };

  const std::string prompt1 = render_prompt(1, instruction);
  try {
    rec.stage1_raw = policy(1, prompt1, image, rng);
  } catch (const policy_transport_error& e) {
    rec.episode_error = e.what();
    return finalize();
  }

  ParseResult p1 = parse_action(rec.stage1_raw, 1);
  if (!p1.ok()) {
    rec.stage1_error = p1.error;
    return finalize();
  }
  rec.stage1_action = p1.action;

  if (p1.action->kind == ActionKind::answer) {
    rec.outcome.tool = ToolSpec::none();
    rec.outcome.format_ok = true;
    rec.outcome.final_point_original = p1.action->point;
    return finalize();
  }

  // Tool branch: stage 1 parsed as a tool call.
  rec.step_count = 2;
  const ToolSpec& tool = p1.action->tool;
  const BBox region = crop_region(tool, image.dims());
  rec.tool_region = region;
  rec.outcome.tool = tool;
  rec.outcome.tool_region = region;
  double view_scale = 1.0;
  if (tool.kind == ToolKind::zoom) {
    rec.zoom_scale = tool.scale;
    view_scale = tool.scale;
  }

  Image view;
  try {
    view = crop_image(image, region);
    if (tool.kind == ToolKind::zoom) {
      const long long zw = round_half_up(tool.scale * view.width);
      const long long zh = round_half_up(tool.scale * view.height);
      if (zw < 1 || zh < 1 || zw * zh > opts.max_tool_pixels)
        throw invalid_input_error("zoom output size out of range");
      view = zoom_image(view, tool.scale);
    }
  } catch (const empty_crop_error& e) {
    rec.invalid_action = e.what();
    return finalize();
  } catch (const invalid_input_error& e) {
    rec.invalid_action = e.what();
    return finalize();
  }

  const std::string prompt2 =
      render_prompt(2, instruction, ToolMeta{region, view_scale});
  std::string raw2;
  try {
    raw2 = policy(2, prompt2, view, rng);
  } catch (const policy_transport_error& e) {
    rec.episode_error = e.what();
    return finalize();
  }
  rec.stage2_raw = raw2;

  ParseResult p2 = parse_action(raw2, 2);
  if (!p2.ok()) {
    rec.stage2_error = p2.error;
    return finalize();
  }
  rec.stage2_action = p2.action;

  const Point click = p2.action->point;
  rec.outcome.final_point_original =
      tool.kind == ToolKind::zoom ? map_from_zoom(click, region, tool.scale)
                                  : map_from_crop(click, region);
  rec.outcome.format_ok = true;
  return finalize();
}

// ---- JSONL serialization ----

inline nlohmann::json to_json(const Point& p) {
  return nlohmann::json::array({p.x, p.y});
}

inline nlohmann::json to_json(const BBox& b) {
  return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2});
}

inline nlohmann::json to_json(const ToolSpec& t) {
  nlohmann::json j;
  switch (t.kind) {
    case ToolKind::none:
      j["name"] = "none";
      return j;
    case ToolKind::crop:
      j["name"] = "crop";
      break;
    case ToolKind::zoom:
      j["name"] = "zoom";
      j["scale"] = t.scale;
      break;
  }
  j["center"] = to_json(t.center);
  j["size"] = nlohmann::json::array({t.width, t.height});
  return j;
}

inline nlohmann::json to_json(const Action& a) {
  nlohmann::json j;
  if (a.kind == ActionKind::tool_call) {
    j["kind"] = "tool_call";
    j["tool"] = to_json(a.tool);
  } else {
    j["kind"] = "answer";
    j["point"] = to_json(a.point);
  }
  if (!a.think.empty()) j["think"] = a.think;
  return j;
}

inline nlohmann::json to_json(const RewardBreakdown& r) {
  return nlohmann::json{{"r_format", r.r_format},
                        {"r_acc", r.r_acc},
                        {"r_tool", r.r_tool},
                        {"center_term", r.center_term},
                        {"overlap_term", r.overlap_term},
                        {"total", r.total}};
}

inline nlohmann::json episode_to_json(const EpisodeRecord& rec) {
  nlohmann::json j;
  j["instruction"] = rec.instruction;
  j["image"] = rec.image_ref;
  j["image_dims"] = nlohmann::json::array(
      {rec.image_dims.width, rec.image_dims.height});
  j["step_count"] = rec.step_count;
  j["stage1_raw"] = rec.stage1_raw;
  if (rec.stage1_action) j["stage1_action"] = to_json(*rec.stage1_action);
  if (rec.stage1_error)
    j["stage1_error"] = to_string(rec.stage1_error->reason);
  if (rec.stage2_raw) j["stage2_raw"] = *rec.stage2_raw;
  if (rec.stage2_action) j["stage2_action"] = to_json(*rec.stage2_action);
  if (rec.stage2_error)
    j["stage2_error"] = to_string(rec.stage2_error->reason);
  if (rec.tool_region) j["tool_region"] = to_json(*rec.tool_region);
  if (rec.zoom_scale) j["zoom_scale"] = *rec.zoom_scale;
  if (rec.invalid_action) j["invalid_action"] = *rec.invalid_action;
  if (rec.episode_error) j["episode_error"] = *rec.episode_error;
  j["format_ok"] = rec.outcome.format_ok;
  if (rec.outcome.final_point_original)
    j["final_point"] = to_json(*rec.outcome.final_point_original);
  j["gt"] = to_json(rec.outcome.gt);
  j["reward"] = to_json(rec.reward);
  return j;
}

}  // namespace guigaze
