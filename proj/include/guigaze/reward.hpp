#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "guigaze/config.hpp"
#include "guigaze/geometry.hpp"

namespace guigaze {

/// Coefficients of the composite trajectory reward
///
///   total = lambda_acc * r_acc + lambda_format * r_format + lambda_tool * r_tool
///   r_tool = lambda_center * exp(-alpha * (d / sigma)^2)
///          + lambda_overlap * |region ∩ gt| / |gt|
///
/// with sigma = sigma_scale * diagonal(gt). Defaults are the reference
/// configuration this project trains and evaluates with.
struct RewardWeights {
  double lambda_acc = 0.6;
  double lambda_format = 0.1;
  double lambda_tool = 0.3;
  double lambda_center = 0.7;
  double lambda_overlap = 0.3;
  double alpha = 1.5;
  double sigma_scale = 1.6;

  void validate() const {
    const double vals[] = {lambda_acc,  lambda_format,  lambda_tool,
                           lambda_center, lambda_overlap, alpha, sigma_scale};
    for (double v : vals)
      if (!std::isfinite(v) || v < 0.0)
        throw invalid_input_error("RewardWeights: fields must be finite and >= 0");
    if (!(alpha > 0.0))
      throw invalid_input_error("RewardWeights: alpha must be positive");
    if (!(sigma_scale > 0.0))
      throw invalid_input_error("RewardWeights: sigma_scale must be positive");
  }

  /// Populate from a flat key-value config; unspecified keys keep defaults.
  static RewardWeights from_config(Config& cfg) {
    RewardWeights w;
    w.lambda_acc = cfg.take_double("lambda_acc", w.lambda_acc);
    w.lambda_format = cfg.take_double("lambda_format", w.lambda_format);
    w.lambda_tool = cfg.take_double("lambda_tool", w.lambda_tool);
    w.lambda_center = cfg.take_double("lambda_center", w.lambda_center);
    w.lambda_overlap = cfg.take_double("lambda_overlap", w.lambda_overlap);
    w.alpha = cfg.take_double("alpha", w.alpha);
    w.sigma_scale = cfg.take_double("sigma_scale", w.sigma_scale);
    w.validate();
    return w;
  }

  static RewardWeights from_file(const std::string& path) {
    Config cfg = Config::from_file(path);
    RewardWeights w = from_config(cfg);
    cfg.finish();
    return w;
  }
};

/// Tool-reward ablation variants: the full two-term reward, or one term
/// knocked out by zeroing its weight.
enum class RewardVariant { full, center_only, overlap_only };

inline std::string to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::full: return "Full";
    case RewardVariant::center_only: return "CenterOnly";
    case RewardVariant::overlap_only: return "OverlapOnly";
  }
  return "Full";
}

inline RewardVariant parse_variant(const std::string& s) {
  if (s == "Full" || s == "full") return RewardVariant::full;
  if (s == "CenterOnly" || s == "center_only") return RewardVariant::center_only;
  if (s == "OverlapOnly" || s == "overlap_only") return RewardVariant::overlap_only;
  throw config_error("unknown reward variant: " + s);
}

struct RewardBreakdown {
  double r_format = 0.0;     // {0, 1}
  double r_acc = 0.0;        // {0, 1}
  double r_tool = 0.0;
  double center_term = 0.0;  // exp(-alpha (d/sigma)^2)
  double overlap_term = 0.0; // |region ∩ gt| / |gt|
  double total = 0.0;
};

/// Everything the reward needs to know about one finished episode.
struct TrajectoryOutcome {
  bool format_ok = false;
  ToolSpec tool;
  std::optional<BBox> tool_region;            // present iff tool was invoked
  std::optional<Point> final_point_original;  // present iff format_ok
  BBox gt;
};

/// sigma = sigma_scale * diagonal length of the ground-truth box.
inline double sigma_of(const BBox& gt, const RewardWeights& w) {
  if (!(gt.area() > 0.0))
    throw degenerate_target_error("sigma_of: zero-area target box");
  return w.sigma_scale * gt.diagonal();
}

/// 1 iff the final click landed inside or on the ground-truth box.
inline double accuracy_reward(const TrajectoryOutcome& outcome) {
  if (!outcome.final_point_original) return 0.0;
  return outcome.gt.contains(*outcome.final_point_original) ? 1.0 : 0.0;
}

/// 1 iff every emitted stage parsed with valid parameters.
inline double format_reward(const TrajectoryOutcome& outcome) {
  return outcome.format_ok ? 1.0 : 0.0;
}

/// Gaussian center-proximity term plus region-coverage term.
///
/// With a tool, the scored center is the tool's center and the coverage is
/// taken over the clamped tool region. Without a tool the region is empty --
/// the coverage term is zero -- and the scored center is the final predicted
/// point, so accurate direct answers still earn the proximity term.
inline RewardBreakdown tool_reward(const TrajectoryOutcome& outcome,
                                   const RewardWeights& w,
                                   RewardVariant variant = RewardVariant::full) {
  const double sigma = sigma_of(outcome.gt, w);

  RewardBreakdown out;
  std::optional<Point> center;
  if (outcome.tool.is_tool()) {
    center = outcome.tool.center;
    if (outcome.tool_region)
      out.overlap_term = coverage_fraction(*outcome.tool_region, outcome.gt);
  } else if (outcome.final_point_original) {
    center = outcome.final_point_original;
  }
  if (center) {
    const double d = boundary_distance(*center, outcome.gt);
    const double ratio = d / sigma;
    out.center_term = std::exp(-w.alpha * ratio * ratio);
  }

  const double lc = variant == RewardVariant::overlap_only ? 0.0 : w.lambda_center;
  const double lo = variant == RewardVariant::center_only ? 0.0 : w.lambda_overlap;
  out.r_tool = lc * out.center_term + lo * out.overlap_term;
  return out;
}

/// Assemble the full trajectory reward. Malformed trajectories score zero on
/// every term; under group-normalized advantages that already produces the
/// negative learning signal.
inline RewardBreakdown total_reward(const TrajectoryOutcome& outcome,
                                    const RewardWeights& w,
                                    RewardVariant variant = RewardVariant::full) {
  if (!outcome.format_ok) return RewardBreakdown{};
  RewardBreakdown out = tool_reward(outcome, w, variant);
  out.r_format = format_reward(outcome);
  out.r_acc = accuracy_reward(outcome);
  out.total = w.lambda_acc * out.r_acc + w.lambda_format * out.r_format +
              w.lambda_tool * out.r_tool;
  return out;
}

}  // namespace guigaze
