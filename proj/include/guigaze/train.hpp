#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "guigaze/grpo.hpp"
#include "guigaze/protocol.hpp"
#include "guigaze/scripted.hpp"
#include "guigaze/synthetic.hpp"
#include "guigaze/toy_policy.hpp"

namespace guigaze {

struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double success_rate = 0.0;  // fraction of trajectories with r_acc = 1
  double tool_rate = 0.0;     // fraction of trajectories that invoked a tool
};

struct ToyTrainConfig {
  GrpoConfig grpo;
  RewardWeights weights;
  RewardVariant variant = RewardVariant::full;
  ScreenConfig screen;
  double crop_fraction = 0.4;
  int train_groups = 300;
  int eval_screens = 400;
  bool eval_greedy = false;            // argmax vs sampled held-out evaluation
  std::uint64_t eval_seed = 0xe7a1d5;  // held-out screens, shared across runs

  // The linear-softmax toy policy needs a far larger step size than a
  // finetuned network; 2.0 reaches a strong policy within a few hundred
  // groups on the default screens.
  ToyTrainConfig() { grpo.learning_rate = 2.0; }

  static ToyTrainConfig from_config(Config& cfg) {
    ToyTrainConfig c;
    c.grpo = GrpoConfig::from_config(cfg);
    c.weights = RewardWeights::from_config(cfg);
    c.variant = parse_variant(cfg.take_string("variant", "Full"));
    c.screen.grid = cfg.take_int("grid", c.screen.grid);
    c.screen.dims.width = cfg.take_int("screen_width", c.screen.dims.width);
    c.screen.dims.height = cfg.take_int("screen_height", c.screen.dims.height);
    c.screen.n_elements = cfg.take_int("n_elements", c.screen.n_elements);
    c.screen.min_element_frac =
        cfg.take_double("min_element_frac", c.screen.min_element_frac);
    c.screen.max_element_frac =
        cfg.take_double("max_element_frac", c.screen.max_element_frac);
    c.crop_fraction = cfg.take_double("crop_fraction", c.crop_fraction);
    c.train_groups = cfg.take_int("train_groups", c.train_groups);
    c.eval_screens = cfg.take_int("eval_screens", c.eval_screens);
    c.eval_greedy = cfg.take_int("eval_greedy", c.eval_greedy ? 1 : 0) != 0;
    c.eval_seed = static_cast<std::uint64_t>(
        cfg.take_double("eval_seed", static_cast<double>(c.eval_seed)));
    return c;
  }

  static ToyTrainConfig from_file(const std::string& path) {
    Config cfg = Config::from_file(path);
    ToyTrainConfig c = from_config(cfg);
    cfg.finish();
    return c;
  }
};

namespace detail {

inline int target_color_of(const SyntheticScreen& screen) {
  for (const auto& el : screen.elements)
    if (el.is_target) return el.color_id;
  throw generation_error("screen has no target element");
}

struct SampledTrajectory {
  double reward = 0.0;
  double advantage = 0.0;
  std::vector<ToyChoice> choices;
  std::vector<double> logp_old;
  bool success = false;
  bool used_tool = false;
};

}  // namespace detail

/// One GRPO update: sample a group of trajectories per screen with the
/// current (old) policy, normalize rewards into advantages per group, then
/// ascend the clipped surrogate. The score-function gradient of each step is
/// weighted by the trajectory's shared advantage, averaged over the
/// trajectory's actual steps, and gated to zero where the clip is binding.
inline StepMetrics train_step(ToyPolicyParams& params,
                              std::span<const SyntheticScreen> screens,
                              const ToyTrainConfig& cfg, std::uint64_t seed) {
  cfg.grpo.validate();
  const int n = cfg.grpo.group_size;

  EpisodeOptions opts;
  opts.weights = cfg.weights;
  opts.variant = cfg.variant;

  std::vector<std::vector<detail::SampledTrajectory>> groups;
  StepMetrics metrics;
  int total_trajectories = 0;

  for (std::size_t s = 0; s < screens.size(); ++s) {
    const SyntheticScreen& screen = screens[s];
    const Image img = render_screen(screen);
    const int color = detail::target_color_of(screen);

    std::vector<detail::SampledTrajectory> group(n);
    std::vector<double> rewards(n);
    for (int i = 0; i < n; ++i) {
      std::vector<ToyChoice> trace;
      ToyAgent agent{&params, color, /*greedy=*/false, &trace};
      const std::uint64_t ep_seed =
          derive_seed(seed, (s << 20) + static_cast<std::uint64_t>(i));
      EpisodeRecord rec = run_episode(PolicyFn(agent), screen.instruction, img,
                                      screen.gt, ep_seed, opts);
      if (rec.episode_error)
        throw policy_transport_error("train_step: episode failed: " +
                                     *rec.episode_error);
      auto& traj = group[i];
      traj.reward = rec.reward.total;
      traj.success = rec.reward.r_acc == 1.0;
      traj.used_tool = rec.outcome.tool.is_tool();
      traj.choices = std::move(trace);
      for (const auto& choice : traj.choices)
        traj.logp_old.push_back(toy_logprob(params, choice));
      rewards[i] = traj.reward;

      metrics.mean_reward += traj.reward;
      metrics.success_rate += traj.success ? 1.0 : 0.0;
      metrics.tool_rate += traj.used_tool ? 1.0 : 0.0;
      ++total_trajectories;
    }
    const std::vector<double> adv = group_advantages(rewards);
    for (int i = 0; i < n; ++i) group[i].advantage = adv[i];
    groups.push_back(std::move(group));
  }

  if (total_trajectories > 0) {
    metrics.mean_reward /= total_trajectories;
    metrics.success_rate /= total_trajectories;
    metrics.tool_rate /= total_trajectories;
  }

  for (int epoch = 0; epoch < cfg.grpo.inner_epochs; ++epoch) {
    ToyGrad grad = ToyGrad::zeros_like(params);
    for (const auto& group : groups) {
      for (const auto& traj : group) {
        if (traj.advantage == 0.0 || traj.choices.empty()) continue;
        const double step_weight =
            1.0 / (static_cast<double>(traj.choices.size()) *
                   total_trajectories);
        for (std::size_t t = 0; t < traj.choices.size(); ++t) {
          auto [logp_new, glp] = toy_logprob_grad(params, traj.choices[t]);
          const double rho = std::exp(logp_new - traj.logp_old[t]);
          const double unclipped = rho * traj.advantage;
          const double clipped =
              std::clamp(rho, 1.0 - cfg.grpo.epsilon, 1.0 + cfg.grpo.epsilon) *
              traj.advantage;
          if (unclipped > clipped) continue;  // clip binding: zero gradient
          grad.add_scaled(glp, step_weight * rho * traj.advantage);
        }
      }
    }
    const double lr = cfg.grpo.learning_rate;
    for (std::size_t i = 0; i < params.w1.size(); ++i)
      params.w1[i] += lr * grad.w1[i];
    for (std::size_t i = 0; i < params.w2.size(); ++i)
      params.w2[i] += lr * grad.w2[i];
    params.tool_logits[0] += lr * grad.tool_logits[0];
    params.tool_logits[1] += lr * grad.tool_logits[1];
  }
  return metrics;
}

/// Grounding success over freshly generated held-out screens, with either
/// sampled actions (the distribution GRPO optimizes) or greedy argmax.
inline double toy_success_rate(const ToyPolicyParams& params,
                               const ToyTrainConfig& cfg,
                               std::uint64_t eval_seed) {
  EpisodeOptions opts;
  opts.weights = cfg.weights;
  opts.variant = cfg.variant;
  int correct = 0;
  for (int e = 0; e < cfg.eval_screens; ++e) {
    const SyntheticScreen screen =
        generate_screen(derive_seed(eval_seed, e), cfg.screen);
    const Image img = render_screen(screen);
    ToyAgent agent{&params, detail::target_color_of(screen), cfg.eval_greedy,
                   nullptr};
    EpisodeRecord rec = run_episode(PolicyFn(agent), screen.instruction, img,
                                    screen.gt, derive_seed(eval_seed, e + 1),
                                    opts);
    if (rec.reward.r_acc == 1.0) ++correct;
  }
  return cfg.eval_screens > 0 ? static_cast<double>(correct) / cfg.eval_screens
                              : 0.0;
}

struct ToyTrainResult {
  ToyPolicyParams params;
  std::vector<StepMetrics> history;
  double untrained_success = 0.0;
  double final_success = 0.0;
};

/// Full desk-scale training run: `train_groups` GRPO steps with one fresh
/// screen (one group of trajectories) per step, evaluated greedily on a
/// held-out screen set before and after.
inline ToyTrainResult run_toy_training(const ToyTrainConfig& cfg,
                                       std::uint64_t seed) {
  ToyTrainResult result;
  result.params = ToyPolicyParams::init(cfg.screen.grid, cfg.crop_fraction);

  result.untrained_success = toy_success_rate(result.params, cfg, cfg.eval_seed);

  for (int g = 0; g < cfg.train_groups; ++g) {
    const SyntheticScreen screen =
        generate_screen(derive_seed(seed, 0x5c000 + g), cfg.screen);
    StepMetrics m = train_step(result.params, std::span(&screen, 1), cfg,
                               derive_seed(seed, 0x7e000 + g));
    m.step = g;
    result.history.push_back(m);
  }

  result.final_success = toy_success_rate(result.params, cfg, cfg.eval_seed);
  return result;
}

inline void write_metrics_csv(const std::string& path,
                              const std::vector<StepMetrics>& history) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write metrics file: " + path);
  out << "step,mean_reward,success_rate,tool_rate\n";
  for (const auto& m : history)
    out << m.step << ',' << m.mean_reward << ',' << m.success_rate << ','
        << m.tool_rate << '\n';
}

}  // namespace guigaze
