#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "guigaze/png_io.hpp"
#include "guigaze/protocol.hpp"
#include "guigaze/train.hpp"

namespace guigaze {

/// One grounding benchmark instance.
struct DatasetRecord {
  std::string image;        // path, relative to the dataset file
  std::string instruction;
  BBox gt;                  // original-image pixels
  std::string platform;     // mobile | desktop | web
  std::string ui_type;      // text | icon
  std::string group;        // free-form category label (CAD, Office, ...)
};

struct DatasetLineError {
  int line = 0;
  std::string reason;
};

struct Dataset {
  std::vector<DatasetRecord> records;
  std::vector<DatasetLineError> line_errors;
  std::string base_dir;  // directory of the dataset file, for image paths
};

/// Load a line-delimited JSON dataset. Each line must carry exactly the
/// fields image, instruction, bbox:[x1,y1,x2,y2], platform, ui_type, group.
/// Malformed lines are collected with their line numbers; loading fails only
/// when no line survives validation.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dataset_error("load_dataset: cannot open " + path);

  Dataset ds;
  ds.base_dir = std::filesystem::path(path).parent_path().string();

  static const std::array<const char*, 6> kFields = {
      "image", "instruction", "bbox", "platform", "ui_type", "group"};

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fail = [&](const std::string& reason) {
      ds.line_errors.push_back({lineno, reason});
    };
    const nlohmann::json j =
        nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      fail("not a JSON object");
      continue;
    }
    bool bad = false;
    for (const char* field : kFields)
      if (!j.contains(field)) {
        fail(std::string("missing field `") + field + "`");
        bad = true;
        break;
      }
    if (bad) continue;
    if (j.size() != kFields.size()) {
      fail("unexpected extra fields");
      continue;
    }

    DatasetRecord rec;
    if (!j["image"].is_string() || !j["instruction"].is_string() ||
        !j["platform"].is_string() || !j["ui_type"].is_string() ||
        !j["group"].is_string()) {
      fail("string fields have wrong types");
      continue;
    }
    rec.image = j["image"].get<std::string>();
    rec.instruction = j["instruction"].get<std::string>();
    rec.platform = j["platform"].get<std::string>();
    rec.ui_type = j["ui_type"].get<std::string>();
    rec.group = j["group"].get<std::string>();

    const auto& bbox = j["bbox"];
    if (!bbox.is_array() || bbox.size() != 4 || !bbox[0].is_number() ||
        !bbox[1].is_number() || !bbox[2].is_number() || !bbox[3].is_number()) {
      fail("bbox must be [x1,y1,x2,y2]");
      continue;
    }
    rec.gt = BBox{bbox[0].get<double>(), bbox[1].get<double>(),
                  bbox[2].get<double>(), bbox[3].get<double>()};
    if (!rec.gt.valid()) {
      fail("bbox violates x1 <= x2, y1 <= y2");
      continue;
    }
    if (!(rec.gt.area() > 0.0)) {
      fail("bbox has zero area");
      continue;
    }
    if (rec.platform != "mobile" && rec.platform != "desktop" &&
        rec.platform != "web") {
      fail("platform must be mobile|desktop|web");
      continue;
    }
    if (rec.ui_type != "text" && rec.ui_type != "icon") {
      fail("ui_type must be text|icon");
      continue;
    }

    const auto img_path =
        (std::filesystem::path(ds.base_dir) / rec.image).string();
    ImageDims dims;
    try {
      dims = read_png_dims(img_path);
    } catch (const image_io_error& e) {
      fail(e.what());
      continue;
    }
    if (rec.gt.x1 < 0 || rec.gt.y1 < 0 || rec.gt.x2 > dims.width ||
        rec.gt.y2 > dims.height) {
      fail("bbox exceeds image bounds");
      continue;
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty())
    throw dataset_error("load_dataset: no valid records in " + path);
  return ds;
}

/// Benchmark membership rule: 1 iff the prediction falls inside or on the
/// ground-truth box. Shares BBox::contains with accuracy_reward.
inline int score_prediction(const Point& pred, const BBox& gt) {
  return gt.contains(pred) ? 1 : 0;
}

enum class EvalMode { full_episode, direct_only };

inline std::string to_string(EvalMode m) {
  return m == EvalMode::full_episode ? "full-episode" : "direct-only";
}

/// Builds the policy used for one record. Scripted policies can close over
/// the record (e.g. its ground truth); remote policies ignore it.
using PolicyFactory = std::function<PolicyFn(const DatasetRecord&)>;

struct EvalOptions {
  EvalMode mode = EvalMode::full_episode;
  std::uint64_t seed = 0;
  RewardWeights weights;
  RewardVariant variant = RewardVariant::full;
  // Errored episodes (transport failures, unusable images) count as
  // incorrect by default, keeping cell denominators fixed.
  bool exclude_errors = false;
  long long max_tool_pixels = 1LL << 24;
};

struct CellStats {
  int total = 0;
  int correct = 0;
  int errors = 0;

  int denominator(bool exclude_errors) const {
    return exclude_errors ? total - errors : total;
  }
  std::optional<double> accuracy_pct(bool exclude_errors) const {
    const int denom = denominator(exclude_errors);
    if (denom <= 0) return {};
    return 100.0 * correct / denom;
  }
};

struct EvalReport {
  std::map<std::pair<std::string, std::string>, CellStats> by_platform_ui;
  std::map<std::pair<std::string, std::string>, CellStats> by_group_ui;
  CellStats overall;

  // config echo
  std::string mode;
  std::uint64_t seed = 0;
  RewardWeights weights;
  std::string variant;
  std::optional<double> baseline_alpha;
  bool exclude_errors = false;

  std::optional<double> micro_average_pct() const {
    return overall.accuracy_pct(exclude_errors);
  }

  /// Unweighted mean over non-empty platform x ui_type cells.
  std::optional<double> cell_average_pct() const {
    double sum = 0.0;
    int n = 0;
    for (const auto& [key, cell] : by_platform_ui) {
      if (const auto acc = cell.accuracy_pct(exclude_errors)) {
        sum += *acc;
        ++n;
      }
    }
    if (n == 0) return {};
    return sum / n;
  }
};

namespace detail {

inline std::uint64_t record_seed(const DatasetRecord& rec, std::uint64_t seed) {
  // Derived from record content, not position, so reports are invariant
  // under record reordering.
  return fnv1a64(rec.image + "\x1f" + rec.instruction, seed * 0x9e3779b97f4a7c15ULL + 1);
}

struct RecordResult {
  bool errored = false;
  int correct = 0;
  std::string error;
};

/// Single stage-2-style query on the given view; the answer is mapped back
/// through `region` (identity for the full image).
inline RecordResult direct_query(const DatasetRecord& rec, const PolicyFn& policy,
                                 const Image& view, const BBox& region,
                                 std::uint64_t seed) {
  RecordResult out;
  Rng rng(seed);
  const std::string prompt =
      render_prompt(2, rec.instruction, ToolMeta{region, 1.0});
  std::string raw;
  try {
    raw = policy(2, prompt, view, rng);
  } catch (const policy_transport_error& e) {
    out.errored = true;
    out.error = e.what();
    return out;
  }
  const ParseResult parsed = parse_action(raw, 2);
  if (!parsed.ok()) return out;  // malformed: incorrect, not errored
  const Point mapped = map_from_crop(parsed.action->point, region);
  out.correct = score_prediction(mapped, rec.gt);
  return out;
}

inline void accumulate(EvalReport& report, const DatasetRecord& rec,
                       const RecordResult& res) {
  auto bump = [&](CellStats& cell) {
    cell.total += 1;
    if (res.errored)
      cell.errors += 1;
    else
      cell.correct += res.correct;
  };
  bump(report.by_platform_ui[{rec.platform, rec.ui_type}]);
  bump(report.by_group_ui[{rec.group, rec.ui_type}]);
  bump(report.overall);
}

}  // namespace detail

/// Run every record through the policy and aggregate accuracies.
///
/// full-episode mode plays the two-stage rollout via run_episode and scores
/// the final mapped click; direct-only mode issues a single stage-2-style
/// query on the full image. Per-record RNG streams are derived from record
/// content, so the report is deterministic per seed and invariant under
/// record reordering.
inline EvalReport evaluate(const Dataset& ds, const PolicyFactory& factory,
                           const EvalOptions& options,
                           std::vector<EpisodeRecord>* episode_sink = nullptr) {
  EvalReport report;
  report.mode = to_string(options.mode);
  report.seed = options.seed;
  report.weights = options.weights;
  report.variant = to_string(options.variant);
  report.exclude_errors = options.exclude_errors;

  EpisodeOptions ep_opts;
  ep_opts.weights = options.weights;
  ep_opts.variant = options.variant;
  ep_opts.max_tool_pixels = options.max_tool_pixels;

  for (const DatasetRecord& rec : ds.records) {
    const std::uint64_t seed = detail::record_seed(rec, options.seed);
    detail::RecordResult res;
    try {
      const auto img_path =
          (std::filesystem::path(ds.base_dir) / rec.image).string();
      const Image img = read_png(img_path);
      const PolicyFn policy = factory(rec);
      if (options.mode == EvalMode::direct_only) {
        const BBox full{0.0, 0.0, static_cast<double>(img.width),
                        static_cast<double>(img.height)};
        res = detail::direct_query(rec, policy, img, full, seed);
      } else {
        EpisodeRecord ep = run_episode(policy, rec.instruction, img, rec.gt,
                                       seed, ep_opts, rec.image);
        if (ep.episode_error) {
          res.errored = true;
          res.error = *ep.episode_error;
        } else if (ep.outcome.final_point_original) {
          res.correct =
              score_prediction(*ep.outcome.final_point_original, rec.gt);
        }
        if (episode_sink) episode_sink->push_back(std::move(ep));
      }
    } catch (const image_io_error& e) {
      res.errored = true;
      res.error = e.what();
    }
    detail::accumulate(report, rec, res);
  }
  return report;
}

/// Reference click points for the static-crop baseline, keyed by
/// (image, instruction).
using ReferencePoints = std::map<std::string, Point>;

inline std::string reference_key(const std::string& image,
                                 const std::string& instruction) {
  return image + "\x1f" + instruction;
}

/// Load reference points from line-delimited JSON:
/// {"image":..., "instruction":..., "point":[x,y]}
inline ReferencePoints load_reference_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dataset_error("load_reference_points: cannot open " + path);
  ReferencePoints refs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const nlohmann::json j =
        nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("image") ||
        !j.contains("instruction") || !j.contains("point") ||
        !j["point"].is_array() || j["point"].size() != 2)
      throw dataset_error("load_reference_points: bad line " +
                          std::to_string(lineno));
    refs[reference_key(j["image"].get<std::string>(),
                       j["instruction"].get<std::string>())] =
        Point{j["point"][0].get<double>(), j["point"][1].get<double>()};
  }
  return refs;
}

/// Fixed-crop ablation: crop a region of size (alpha*W, alpha*H) centered on
/// an externally supplied reference point, query the policy on the crop, and
/// map the click back. alpha = 0 bypasses the crop entirely and is exactly
/// the direct-only evaluation.
inline EvalReport static_crop_baseline(const Dataset& ds,
                                       const ReferencePoints& refs,
                                       double alpha,
                                       const PolicyFactory& factory,
                                       const EvalOptions& options) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw invalid_input_error("static_crop_baseline: alpha must be in [0, 1]");
  if (alpha == 0.0) {
    EvalOptions direct = options;
    direct.mode = EvalMode::direct_only;
    EvalReport report = evaluate(ds, factory, direct);
    report.baseline_alpha = alpha;
    return report;
  }

  EvalReport report;
  report.mode = "static-crop";
  report.seed = options.seed;
  report.weights = options.weights;
  report.variant = to_string(options.variant);
  report.baseline_alpha = alpha;
  report.exclude_errors = options.exclude_errors;

  for (const DatasetRecord& rec : ds.records) {
    const std::uint64_t seed = detail::record_seed(rec, options.seed);
    detail::RecordResult res;
    try {
      const auto it = refs.find(reference_key(rec.image, rec.instruction));
      if (it == refs.end())
        throw dataset_error("no reference point for " + rec.image);
      const auto img_path =
          (std::filesystem::path(ds.base_dir) / rec.image).string();
      const Image img = read_png(img_path);
      const ToolSpec spec = ToolSpec::crop(it->second, alpha * img.width,
                                           alpha * img.height);
      const BBox region = crop_region(spec, img.dims());
      const Image view = crop_image(img, region);
      res = detail::direct_query(rec, factory(rec), view, region, seed);
    } catch (const image_io_error& e) {
      res.errored = true;
      res.error = e.what();
    } catch (const dataset_error& e) {
      res.errored = true;
      res.error = e.what();
    } catch (const empty_crop_error& e) {
      res.errored = true;
      res.error = e.what();
    }
    detail::accumulate(report, rec, res);
  }
  return report;
}

// ---- sweep runner ----

struct SweepConfigRow {
  std::string label;
  RewardWeights weights;
  RewardVariant variant = RewardVariant::full;
};

/// Line-delimited JSON grid: {"label":..., "variant":..., "weights":{...}}
/// where weights overrides any subset of the reward coefficients.
inline std::vector<SweepConfigRow> load_sweep_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("load_sweep_grid: cannot open " + path);
  std::vector<SweepConfigRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const nlohmann::json j =
        nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("label"))
      throw config_error("load_sweep_grid: bad line " + std::to_string(lineno));
    SweepConfigRow row;
    row.label = j["label"].get<std::string>();
    if (j.contains("variant"))
      row.variant = parse_variant(j["variant"].get<std::string>());
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      auto take = [&](const char* key, double fallback) {
        return w.contains(key) ? w[key].get<double>() : fallback;
      };
      row.weights.lambda_acc = take("lambda_acc", row.weights.lambda_acc);
      row.weights.lambda_format = take("lambda_format", row.weights.lambda_format);
      row.weights.lambda_tool = take("lambda_tool", row.weights.lambda_tool);
      row.weights.lambda_center = take("lambda_center", row.weights.lambda_center);
      row.weights.lambda_overlap = take("lambda_overlap", row.weights.lambda_overlap);
      row.weights.alpha = take("alpha", row.weights.alpha);
      row.weights.sigma_scale = take("sigma_scale", row.weights.sigma_scale);
      row.weights.validate();
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw config_error("load_sweep_grid: empty grid");
  return rows;
}

struct SweepRow {
  std::string label;
  std::vector<double> per_seed;
  double mean = 0.0;
  double stddev = 0.0;  // population std over seeds
  std::vector<std::string> notes;
};

namespace detail {

inline void finish_sweep_row(SweepRow& row) {
  if (row.per_seed.empty()) return;
  double mean = 0.0;
  for (double v : row.per_seed) mean += v;
  mean /= row.per_seed.size();
  double var = 0.0;
  for (double v : row.per_seed) var += (v - mean) * (v - mean);
  row.mean = mean;
  row.stddev = std::sqrt(var / row.per_seed.size());
}

}  // namespace detail

/// Toy-training sweep: one row per reward config, mean +- std of the final
/// grounding success across seeds.
inline std::vector<SweepRow> sweep_toy(const std::vector<SweepConfigRow>& grid,
                                       const ToyTrainConfig& base,
                                       const std::vector<std::uint64_t>& seeds) {
  if (grid.empty() || seeds.empty())
    throw invalid_input_error("sweep_toy: need at least one config and seed");
  std::vector<SweepRow> rows;
  for (const auto& config : grid) {
    SweepRow row;
    row.label = config.label;
    ToyTrainConfig cfg = base;
    cfg.weights = config.weights;
    cfg.variant = config.variant;
    for (const std::uint64_t seed : seeds) {
      try {
        row.per_seed.push_back(run_toy_training(cfg, seed).final_success);
      } catch (const std::exception& e) {
        row.notes.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    detail::finish_sweep_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Evaluation sweep: one row per config, mean +- std of micro-average
/// accuracy (as a fraction) across seeds.
inline std::vector<SweepRow> sweep_eval(const std::vector<SweepConfigRow>& grid,
                                        const Dataset& ds,
                                        const PolicyFactory& factory,
                                        const EvalOptions& base,
                                        const std::vector<std::uint64_t>& seeds) {
  if (grid.empty() || seeds.empty())
    throw invalid_input_error("sweep_eval: need at least one config and seed");
  std::vector<SweepRow> rows;
  for (const auto& config : grid) {
    SweepRow row;
    row.label = config.label;
    for (const std::uint64_t seed : seeds) {
      EvalOptions options = base;
      options.seed = seed;
      options.weights = config.weights;
      options.variant = config.variant;
      try {
        const EvalReport report = evaluate(ds, factory, options);
        const auto acc = report.micro_average_pct();
        row.per_seed.push_back(acc ? *acc / 100.0 : 0.0);
      } catch (const std::exception& e) {
        row.notes.push_back("seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    detail::finish_sweep_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- report emission ----

namespace detail {

inline std::string pct_or_na(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

inline std::string report_to_markdown(const EvalReport& r) {
  std::string out;
  out += "# Grounding evaluation report\n\n";
  out += "- mode: " + r.mode + "\n";
  out += "- seed: " + std::to_string(r.seed) + "\n";
  out += "- reward variant: " + r.variant + "\n";
  if (r.baseline_alpha)
    out += "- baseline alpha: " + format_number(*r.baseline_alpha) + "\n";
  out += "- errored records: " + std::to_string(r.overall.errors) +
         (r.exclude_errors ? " (excluded from denominators)"
                           : " (counted as incorrect)") +
         "\n";
  out += "- micro average: " + detail::pct_or_na(r.micro_average_pct()) +
         "% (" + std::to_string(r.overall.correct) + "/" +
         std::to_string(r.overall.denominator(r.exclude_errors)) + ")\n";
  out += "- cell average (platform x ui_type): " +
         detail::pct_or_na(r.cell_average_pct()) + "%\n\n";

  const auto emit_table = [&](const char* title, const char* key_name,
                              const auto& cells) {
    out += std::string("## ") + title + "\n\n";
    out += std::string("| ") + key_name +
           " | ui_type | total | correct | errors | accuracy % |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const auto& [key, cell] : cells) {
      out += "| " + key.first + " | " + key.second + " | " +
             std::to_string(cell.total) + " | " + std::to_string(cell.correct) +
             " | " + std::to_string(cell.errors) + " | " +
             detail::pct_or_na(cell.accuracy_pct(r.exclude_errors)) + " |\n";
    }
    out += "\n";
  };
  emit_table("By platform", "platform", r.by_platform_ui);
  emit_table("By group", "group", r.by_group_ui);
  return out;
}

inline std::string report_to_csv(const EvalReport& r) {
  std::string out = "section,key,ui_type,total,correct,errors,accuracy_pct\n";
  const auto emit = [&](const char* section, const auto& cells) {
    for (const auto& [key, cell] : cells)
      out += std::string(section) + "," + key.first + "," + key.second + "," +
             std::to_string(cell.total) + "," + std::to_string(cell.correct) +
             "," + std::to_string(cell.errors) + "," +
             detail::pct_or_na(cell.accuracy_pct(r.exclude_errors)) + "\n";
  };
  emit("platform", r.by_platform_ui);
  emit("group", r.by_group_ui);
  out += "overall,all,all," + std::to_string(r.overall.total) + "," +
         std::to_string(r.overall.correct) + "," +
         std::to_string(r.overall.errors) + "," +
         detail::pct_or_na(r.micro_average_pct()) + "\n";
  return out;
}

inline std::string sweep_to_markdown(const std::vector<SweepRow>& rows,
                                     const std::string& metric_name) {
  std::string out = "| config | " + metric_name + " (mean +- std) | seeds |\n";
  out += "|---|---|---|\n";
  for (const auto& row : rows) {
    std::string seeds;
    for (std::size_t i = 0; i < row.per_seed.size(); ++i) {
      if (i) seeds += " ";
      seeds += detail::fmt3(row.per_seed[i]);
    }
    out += "| " + row.label + " | " + detail::fmt3(row.mean) + " +- " +
           detail::fmt3(row.stddev) + " | " + seeds + " |\n";
    for (const auto& note : row.notes) out += "| ^ error | " + note + " | |\n";
  }
  return out;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "config,mean,std,per_seed\n";
  for (const auto& row : rows) {
    std::string seeds;
    for (std::size_t i = 0; i < row.per_seed.size(); ++i) {
      if (i) seeds += " ";
      seeds += detail::fmt3(row.per_seed[i]);
    }
    out += row.label + "," + detail::fmt3(row.mean) + "," +
           detail::fmt3(row.stddev) + "," + seeds + "\n";
  }
  return out;
}

}  // namespace guigaze
