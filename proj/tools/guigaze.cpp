// Command-line front end: grounding evaluation, the static-crop baseline,
// reward-config sweeps, desk-scale toy training, and a reward self-check.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "guigaze/eval.hpp"
#include "guigaze/remote.hpp"
#include "guigaze/scripted.hpp"
#include "guigaze/train.hpp"

using namespace guigaze;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? v : fallback;
}

struct PolicyFlags {
  std::string endpoint;
  std::string scripted;
  std::string model;
  int timeout_sec = 60;
  int max_retries = 2;
  int snap_grid = 8;
  double noise = 6.0;  // pixel sigma for the noisy scripted policy
};

void add_policy_flags(CLI::App* cmd, PolicyFlags& flags) {
  flags.endpoint = env_or("GUIGAZE_ENDPOINT", "");
  flags.model = env_or("GUIGAZE_MODEL", "default");
  flags.timeout_sec = std::atoi(env_or("GUIGAZE_TIMEOUT", "60").c_str());
  flags.max_retries = std::atoi(env_or("GUIGAZE_RETRIES", "2").c_str());
  cmd->add_option("--endpoint", flags.endpoint,
                  "HTTP model server URL (or env GUIGAZE_ENDPOINT)");
  cmd->add_option("--scripted", flags.scripted,
                  "built-in policy: center | oracle | noisy | snap");
  cmd->add_option("--model", flags.model, "model id sent to the server");
  cmd->add_option("--timeout", flags.timeout_sec, "server timeout, seconds");
  cmd->add_option("--retries", flags.max_retries, "transport retry count");
  cmd->add_option("--snap-grid", flags.snap_grid,
                  "grid resolution of the snap policy");
  cmd->add_option("--noise", flags.noise,
                  "pixel sigma of the noisy scripted policy");
}

PolicyFactory make_policy_factory(const PolicyFlags& flags,
                                  std::uint64_t seed) {
  if (!flags.endpoint.empty()) {
    RemoteConfig cfg;
    cfg.url = flags.endpoint;
    cfg.model = flags.model;
    cfg.timeout_sec = flags.timeout_sec;
    cfg.max_retries = flags.max_retries;
    return [cfg](const DatasetRecord&) { return make_remote_policy(cfg); };
  }
  if (flags.scripted == "center")
    return [](const DatasetRecord&) { return scripted_center_policy(); };
  if (flags.scripted == "oracle")
    return [](const DatasetRecord& rec) {
      return scripted_fixed_point_policy(rec.gt.center());
    };
  if (flags.scripted == "noisy") {
    const double sigma = flags.noise;
    return [sigma, seed](const DatasetRecord& rec) {
      Rng rng(fnv1a64(rec.image + "\x1f" + rec.instruction, seed));
      const Point p{rec.gt.center().x + rng.normal(0, sigma),
                    rec.gt.center().y + rng.normal(0, sigma)};
      return scripted_fixed_point_policy(p);
    };
  }
  if (flags.scripted == "snap") {
    const int grid = flags.snap_grid;
    return [grid](const DatasetRecord& rec) -> PolicyFn {
      const auto color = target_color_from_instruction(rec.instruction);
      if (color) return scripted_snap_policy(*color, grid);
      return scripted_center_policy();
    };
  }
  throw CLI::ValidationError(
      "policy", "pass --endpoint URL or --scripted center|oracle|noisy|snap");
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write " + path);
  out << content;
}

void emit_report(const EvalReport& report, const std::string& out_prefix) {
  if (!out_prefix.empty()) {
    write_file(out_prefix + ".md", report_to_markdown(report));
    write_file(out_prefix + ".csv", report_to_csv(report));
    std::cout << "wrote " << out_prefix << ".md and " << out_prefix << ".csv\n";
  }
  std::cout << "micro average: "
            << detail::pct_or_na(report.micro_average_pct()) << "% ("
            << report.overall.correct << "/"
            << report.overall.denominator(report.exclude_errors)
            << ", errors " << report.overall.errors << ")\n";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) seeds.push_back(std::stoull(token));
  }
  if (seeds.empty()) throw config_error("no seeds given");
  return seeds;
}

// Reward self-check: random integer-coordinate cases compared against a
// pixel-counting oracle and a direct formula evaluation. Mirrors the
// acceptance suite's reward criterion so it can be run standalone.
int run_reward_check(int cases, std::uint64_t seed) {
  Rng rng(seed);
  const long long grid = 64;
  double max_center_err = 0.0;
  int coverage_mismatches = 0;
  const RewardWeights w;
  for (int i = 0; i < cases; ++i) {
    const auto int_box = [&](long long min_side) {
      BBox b;
      b.x1 = static_cast<double>(rng.uniform_int(0, grid - min_side));
      b.y1 = static_cast<double>(rng.uniform_int(0, grid - min_side));
      b.x2 = static_cast<double>(
          rng.uniform_int(static_cast<long long>(b.x1) + min_side, grid));
      b.y2 = static_cast<double>(
          rng.uniform_int(static_cast<long long>(b.y1) + min_side, grid));
      return b;
    };
    const BBox crop = int_box(0);
    const BBox gt = int_box(1);
    const Point c{static_cast<double>(rng.uniform_int(-20, grid + 20)),
                  static_cast<double>(rng.uniform_int(-20, grid + 20))};

    // Pixel brute force over the grid.
    long long inter = 0, gt_count = 0;
    for (long long y = 0; y < grid; ++y)
      for (long long x = 0; x < grid; ++x) {
        const bool in_gt =
            x >= gt.x1 && x + 1 <= gt.x2 && y >= gt.y1 && y + 1 <= gt.y2;
        const bool in_crop =
            x >= crop.x1 && x + 1 <= crop.x2 && y >= crop.y1 && y + 1 <= crop.y2;
        if (in_gt) ++gt_count;
        if (in_gt && in_crop) ++inter;
      }
    const double expected_cov = static_cast<double>(inter) / gt_count;
    TrajectoryOutcome o;
    o.format_ok = true;
    o.tool = ToolSpec::crop(c, crop.width(), crop.height());
    o.tool_region = crop;
    o.final_point_original = c;
    o.gt = gt;
    const RewardBreakdown r = tool_reward(o, w);
    if (r.overlap_term != expected_cov) ++coverage_mismatches;

    // Direct formula evaluation with an independent distance route.
    const double nx = std::clamp(c.x, gt.x1, gt.x2);
    const double ny = std::clamp(c.y, gt.y1, gt.y2);
    const double d = std::hypot(c.x - nx, c.y - ny);
    const double sigma = w.sigma_scale * std::hypot(gt.width(), gt.height());
    const double direct = std::exp(-w.alpha * (d / sigma) * (d / sigma));
    max_center_err = std::max(max_center_err, std::abs(direct - r.center_term));
  }

  // The worked partial-coverage case.
  TrajectoryOutcome o;
  o.format_ok = true;
  o.tool = ToolSpec::crop({250, 125}, 150, 100);
  o.tool_region = BBox{150, 100, 300, 200};
  o.final_point_original = Point{250, 125};
  o.gt = BBox{100, 100, 200, 150};
  const double r_tool = tool_reward(o, w).r_tool;

  std::printf("coverage vs pixel brute force: %d mismatches in %d cases\n",
              coverage_mismatches, cases);
  std::printf("center term vs direct formula: max |err| = %.3g\n",
              max_center_err);
  std::printf("worked case r_tool = %.5f (expected 0.77259)\n", r_tool);
  const bool ok = coverage_mismatches == 0 && max_center_err < 1e-12 &&
                  std::abs(r_tool - 0.77259) < 1e-5;
  std::printf("%s\n", ok ? "reward-check: OK" : "reward-check: FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-perception GUI grounding toolkit"};
  app.require_subcommand(1);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "score a dataset with a policy");
  std::string dataset_path, mode = "full", out_prefix, episodes_out, weights_path;
  std::string variant_name = "Full";
  std::uint64_t seed = 0;
  bool exclude_errors = false;
  PolicyFlags eval_policy;
  eval_cmd->add_option("--dataset", dataset_path, "JSONL dataset")->required();
  eval_cmd->add_option("--mode", mode, "full | direct");
  eval_cmd->add_option("--seed", seed, "master RNG seed");
  eval_cmd->add_option("--out", out_prefix, "report path prefix (.md/.csv)");
  eval_cmd->add_option("--episodes-out", episodes_out,
                       "write per-record episode JSONL (full mode)");
  eval_cmd->add_option("--weights", weights_path, "reward weights config file");
  eval_cmd->add_option("--variant", variant_name,
                       "Full | CenterOnly | OverlapOnly");
  eval_cmd->add_flag("--exclude-errors", exclude_errors,
                     "drop errored records from denominators");
  add_policy_flags(eval_cmd, eval_policy);

  // ---- baseline ----
  auto* base_cmd = app.add_subcommand(
      "baseline", "static-crop ablation around reference points");
  std::string refs_path;
  double alpha = 0.4;
  PolicyFlags base_policy;
  base_cmd->add_option("--dataset", dataset_path, "JSONL dataset")->required();
  base_cmd->add_option("--alpha", alpha, "crop fraction in [0,1]")->required();
  base_cmd->add_option("--refs", refs_path, "JSONL reference points")->required();
  base_cmd->add_option("--seed", seed, "master RNG seed");
  base_cmd->add_option("--out", out_prefix, "report path prefix");
  add_policy_flags(base_cmd, base_policy);

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "run a reward-config grid");
  std::string grid_path, runner = "toy", seeds_text = "0", train_config_path;
  PolicyFlags sweep_policy;
  sweep_cmd->add_option("--grid-file", grid_path, "JSONL config grid")->required();
  sweep_cmd->add_option("--runner", runner, "toy | eval");
  sweep_cmd->add_option("--seeds", seeds_text, "comma-separated seeds");
  sweep_cmd->add_option("--config", train_config_path,
                        "toy training config (toy runner)");
  sweep_cmd->add_option("--dataset", dataset_path, "dataset (eval runner)");
  sweep_cmd->add_option("--out", out_prefix, "table path prefix (.md/.csv)");
  add_policy_flags(sweep_cmd, sweep_policy);

  // ---- train-toy ----
  auto* train_cmd =
      app.add_subcommand("train-toy", "GRPO training of the toy grid policy");
  std::string metrics_out;
  train_cmd->add_option("--config", train_config_path, "key-value config file");
  train_cmd->add_option("--seeds", seeds_text, "comma-separated seeds");
  train_cmd->add_option("--metrics-out", metrics_out,
                        "CSV path (seed appended when several seeds)");

  // ---- reward-check ----
  auto* check_cmd =
      app.add_subcommand("reward-check", "verify reward terms against oracles");
  int check_cases = 1000;
  check_cmd->add_option("--cases", check_cases, "number of random cases");
  check_cmd->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*eval_cmd) {
      const Dataset ds = load_dataset(dataset_path);
      for (const auto& err : ds.line_errors)
        std::cerr << "skipped line " << err.line << ": " << err.reason << "\n";
      EvalOptions options;
      options.mode =
          mode == "direct" ? EvalMode::direct_only : EvalMode::full_episode;
      options.seed = seed;
      options.exclude_errors = exclude_errors;
      if (!weights_path.empty())
        options.weights = RewardWeights::from_file(weights_path);
      options.variant = parse_variant(variant_name);
      std::vector<EpisodeRecord> episodes;
      const EvalReport report =
          evaluate(ds, make_policy_factory(eval_policy, seed), options,
                   episodes_out.empty() ? nullptr : &episodes);
      if (!episodes_out.empty()) {
        std::ofstream out(episodes_out);
        for (const auto& ep : episodes)
          out << episode_to_json(ep).dump() << "\n";
        std::cout << "wrote " << episodes.size() << " episodes to "
                  << episodes_out << "\n";
      }
      emit_report(report, out_prefix);
    } else if (*base_cmd) {
      const Dataset ds = load_dataset(dataset_path);
      const ReferencePoints refs = load_reference_points(refs_path);
      EvalOptions options;
      options.seed = seed;
      const EvalReport report = static_crop_baseline(
          ds, refs, alpha, make_policy_factory(base_policy, seed), options);
      emit_report(report, out_prefix);
    } else if (*sweep_cmd) {
      const auto grid = load_sweep_grid(grid_path);
      const auto seeds = parse_seed_list(seeds_text);
      std::vector<SweepRow> rows;
      std::string metric;
      if (runner == "toy") {
        ToyTrainConfig base;
        if (!train_config_path.empty())
          base = ToyTrainConfig::from_file(train_config_path);
        rows = sweep_toy(grid, base, seeds);
        metric = "final success";
      } else if (runner == "eval") {
        if (dataset_path.empty())
          throw config_error("sweep --runner eval needs --dataset");
        const Dataset ds = load_dataset(dataset_path);
        EvalOptions options;
        rows = sweep_eval(grid, ds, make_policy_factory(sweep_policy, seed),
                          options, seeds);
        metric = "accuracy";
      } else {
        throw config_error("unknown runner: " + runner);
      }
      const std::string table = sweep_to_markdown(rows, metric);
      std::cout << table;
      if (!out_prefix.empty()) {
        write_file(out_prefix + ".md", table);
        write_file(out_prefix + ".csv", sweep_to_csv(rows));
        std::cout << "wrote " << out_prefix << ".md and " << out_prefix
                  << ".csv\n";
      }
    } else if (*train_cmd) {
      ToyTrainConfig cfg;
      if (!train_config_path.empty())
        cfg = ToyTrainConfig::from_file(train_config_path);
      const auto seeds = parse_seed_list(seeds_text);
      double mean_gain = 0.0;
      for (const std::uint64_t s : seeds) {
        const ToyTrainResult result = run_toy_training(cfg, s);
        std::printf("seed %llu: untrained %.3f -> final %.3f (tool rate %.2f)\n",
                    static_cast<unsigned long long>(s),
                    result.untrained_success, result.final_success,
                    result.history.empty() ? 0.0
                                           : result.history.back().tool_rate);
        mean_gain += result.final_success - result.untrained_success;
        if (!metrics_out.empty()) {
          std::string path = metrics_out;
          if (seeds.size() > 1) {
            const auto dot = path.rfind('.');
            const std::string suffix = "_s" + std::to_string(s);
            path = dot == std::string::npos
                       ? path + suffix
                       : path.substr(0, dot) + suffix + path.substr(dot);
          }
          write_metrics_csv(path, result.history);
          std::cout << "wrote " << path << "\n";
        }
      }
      std::printf("mean success gain over %zu seed(s): %.3f\n", seeds.size(),
                  mean_gain / seeds.size());
    } else if (*check_cmd) {
      return run_reward_check(check_cases, seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
