#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "guigaze/config.hpp"
#include "guigaze/errors.hpp"

namespace guigaze {

struct GrpoConfig {
  double epsilon = 0.2;       // clip radius
  int group_size = 6;         // generations per prompt
  double learning_rate = 0.05;
  int inner_epochs = 1;
  double kl_beta = 0.0;       // kept as a hook; the reference setting is 0

  void validate() const {
    if (!(epsilon > 0.0)) throw invalid_input_error("GrpoConfig: epsilon must be > 0");
    if (group_size < 2) throw invalid_input_error("GrpoConfig: group_size must be >= 2");
    if (inner_epochs < 1) throw invalid_input_error("GrpoConfig: inner_epochs must be >= 1");
  }

  static GrpoConfig from_config(Config& cfg) {
    GrpoConfig c;
    c.epsilon = cfg.take_double("epsilon", c.epsilon);
    c.group_size = cfg.take_int("group_size", c.group_size);
    c.learning_rate = cfg.take_double("learning_rate", c.learning_rate);
    c.inner_epochs = cfg.take_int("inner_epochs", c.inner_epochs);
    c.kl_beta = cfg.take_double("kl_beta", c.kl_beta);
    c.validate();
    return c;
  }
};

/// Group-relative advantages: (R_i - mean) / std with the population standard
/// deviation. A group whose rewards are (numerically) constant carries no
/// signal and maps to all zeros.
inline std::vector<double> group_advantages(const std::vector<double>& rewards) {
  const std::size_t n = rewards.size();
  if (n < 2)
    throw invalid_group_error("group_advantages: need at least 2 rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  const double std_dev = std::sqrt(var);
  std::vector<double> adv(n, 0.0);
  if (std_dev < 1e-8) return adv;
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / std_dev;
  return adv;
}

/// One clipped-surrogate term: min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
inline double clipped_term(double rho, double advantage, double epsilon) {
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw invalid_input_error("clipped_term: importance ratio must be positive");
  const double clipped =
      std::clamp(rho, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  return std::min(rho * advantage, clipped);
}

struct StepLogProb {
  double logp_old = 0.0;
  double logp_new = 0.0;
};

/// One sampled trajectory inside a group: its scalar reward, the normalized
/// advantage shared by both decision steps, and per-step log-probabilities
/// under the old (sampling) and current policies.
struct GroupTrajectory {
  double reward = 0.0;
  double advantage = 0.0;
  std::vector<StepLogProb> steps;  // 1 step (direct answer) or 2 (tool use)
};

struct Group {
  std::vector<GroupTrajectory> trajectories;
};

/// Fill in advantages from the trajectories' rewards.
inline void populate_advantages(Group& group) {
  std::vector<double> rewards;
  rewards.reserve(group.trajectories.size());
  for (const auto& t : group.trajectories) rewards.push_back(t.reward);
  const std::vector<double> adv = group_advantages(rewards);
  for (std::size_t i = 0; i < adv.size(); ++i)
    group.trajectories[i].advantage = adv[i];
}

/// Clipped surrogate objective: for every trajectory, the mean over its
/// actual decision steps of clipped_term(exp(logp_new - logp_old), A, eps),
/// averaged over all trajectories. The trajectory-level advantage is shared
/// by both of its steps; a direct-answer trajectory contributes one term.
inline double surrogate_objective(const std::vector<Group>& groups,
                                  const GrpoConfig& cfg) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& group : groups) {
    for (const auto& traj : group.trajectories) {
      if (traj.steps.empty())
        throw contract_error("surrogate_objective: trajectory has no steps");
      double step_sum = 0.0;
      for (const auto& step : traj.steps) {
        const double rho = std::exp(step.logp_new - step.logp_old);
        step_sum += clipped_term(rho, traj.advantage, cfg.epsilon);
      }
      sum += step_sum / static_cast<double>(traj.steps.size());
      ++count;
    }
  }
  if (count == 0) return 0.0;
  return sum / static_cast<double>(count);
}

}  // namespace guigaze
