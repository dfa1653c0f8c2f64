#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "guigaze/prompts.hpp"
#include "guigaze/rng.hpp"
#include "guigaze/synthetic.hpp"

namespace guigaze {

/// Linear-softmax policy over a G x G cell grid. Stage 1 picks a tool
/// decision (direct answer vs crop) and a cell; stage 2 picks a cell of the
/// tool view. Logits are linear in the per-cell target-color indicator
/// features, so log-probabilities and their parameter gradients are exact.
struct ToyPolicyParams {
  int grid = 8;
  double crop_fraction = 0.4;  // crop size as a fraction of each dimension

  // Row-major (logit cell, feature cell) weight matrices, plus the 2-way
  // direct-vs-crop head.
  std::vector<double> w1;
  std::array<double, 2> tool_logits{0.0, 0.0};
  std::vector<double> w2;

  int n_cells() const { return grid * grid; }

  static ToyPolicyParams init(int grid, double crop_fraction = 0.4) {
    if (grid < 1) throw invalid_input_error("ToyPolicyParams: grid must be >= 1");
    if (!(crop_fraction > 0.0) || crop_fraction > 1.0)
      throw invalid_input_error("ToyPolicyParams: crop_fraction must be in (0, 1]");
    ToyPolicyParams p;
    p.grid = grid;
    p.crop_fraction = crop_fraction;
    p.w1.assign(static_cast<std::size_t>(grid) * grid * grid * grid, 0.0);
    p.w2 = p.w1;
    return p;
  }
};

/// Gradient buffer with the same shapes as the parameters.
struct ToyGrad {
  std::vector<double> w1;
  std::array<double, 2> tool_logits{0.0, 0.0};
  std::vector<double> w2;

  static ToyGrad zeros_like(const ToyPolicyParams& p) {
    ToyGrad g;
    g.w1.assign(p.w1.size(), 0.0);
    g.w2.assign(p.w2.size(), 0.0);
    return g;
  }

  void add_scaled(const ToyGrad& other, double scale) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += scale * other.w1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += scale * other.w2[i];
    tool_logits[0] += scale * other.tool_logits[0];
    tool_logits[1] += scale * other.tool_logits[1];
  }
};

/// One atomic stage decision as actually sampled, with the features it was
/// sampled under; enough to re-evaluate its log-probability later.
struct ToyChoice {
  int stage = 1;
  std::vector<double> features;
  int decision = 0;  // stage 1 only: 0 = direct answer, 1 = crop
  int cell = 0;
};

namespace detail {

inline std::vector<double> cell_logits(const std::vector<double>& w,
                                       const std::vector<double>& features) {
  const std::size_t n = features.size();
  std::vector<double> logits(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double* row = w.data() + j * n;
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) acc += row[m] * features[m];
    logits[j] = acc;
  }
  return logits;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace detail

/// Exact log-probability of a recorded choice under the given parameters.
inline double toy_logprob(const ToyPolicyParams& params,
                          const ToyChoice& choice) {
  const auto& w = choice.stage == 1 ? params.w1 : params.w2;
  const auto probs = detail::softmax(detail::cell_logits(w, choice.features));
  double lp = std::log(probs[choice.cell]);
  if (choice.stage == 1) {
    const auto tool_probs = detail::softmax(
        {params.tool_logits[0], params.tool_logits[1]});
    lp += std::log(tool_probs[choice.decision]);
  }
  return lp;
}

/// Log-probability plus its analytic parameter gradient. For the softmax
/// heads, d log pi(k) / d logit_j = delta_jk - p_j and d logit_j / d W[j][m]
/// = f_m.
inline std::pair<double, ToyGrad> toy_logprob_grad(
    const ToyPolicyParams& params, const ToyChoice& choice) {
  ToyGrad grad = ToyGrad::zeros_like(params);
  const std::size_t n = choice.features.size();
  const auto& w = choice.stage == 1 ? params.w1 : params.w2;
  auto& gw = choice.stage == 1 ? grad.w1 : grad.w2;
  const auto probs = detail::softmax(detail::cell_logits(w, choice.features));
  for (std::size_t j = 0; j < n; ++j) {
    const double coeff =
        (static_cast<int>(j) == choice.cell ? 1.0 : 0.0) - probs[j];
    if (coeff == 0.0) continue;
    double* row = gw.data() + j * n;
    for (std::size_t m = 0; m < n; ++m) row[m] = coeff * choice.features[m];
  }
  double lp = std::log(probs[choice.cell]);
  if (choice.stage == 1) {
    const auto tool_probs = detail::softmax(
        {params.tool_logits[0], params.tool_logits[1]});
    lp += std::log(tool_probs[choice.decision]);
    grad.tool_logits[0] = (choice.decision == 0 ? 1.0 : 0.0) - tool_probs[0];
    grad.tool_logits[1] = (choice.decision == 1 ? 1.0 : 0.0) - tool_probs[1];
  }
  return {lp, grad};
}

struct ToyActResult {
  std::string text;
  double logprob = 0.0;
  ToyChoice choice;
};

inline std::string make_answer_text(const Point& p) {
  return "<answer>{\"point\":[" + format_number(p.x) + "," +
         format_number(p.y) + "]}</answer>";
}

inline std::string make_crop_text(const Point& center, double w, double h) {
  return "<tool_call>{\"name\":\"crop\",\"center\":[" + format_number(center.x) +
         "," + format_number(center.y) + "],\"size\":[" + format_number(w) +
         "," + format_number(h) + "]}</tool_call>";
}

inline std::string make_zoom_text(const Point& center, double w, double h,
                                  double z) {
  return "<tool_call>{\"name\":\"zoom\",\"center\":[" + format_number(center.x) +
         "," + format_number(center.y) + "],\"size\":[" + format_number(w) +
         "," + format_number(h) + "],\"scale\":" + format_number(z) +
         "}</tool_call>";
}

/// Sample one stage action (or take the argmax in greedy mode) and emit
/// grammar-conforming text. The answer / crop center is the center of the
/// sampled grid cell of the visible image.
inline ToyActResult toy_act(const ToyPolicyParams& params, int stage,
                            const std::vector<double>& features,
                            const ImageDims& view_dims, Rng& rng,
                            bool greedy = false) {
  if (static_cast<int>(features.size()) != params.n_cells())
    throw invalid_input_error("toy_act: feature vector has the wrong size");

  ToyActResult out;
  out.choice.stage = stage;
  out.choice.features = features;

  const auto& w = stage == 1 ? params.w1 : params.w2;
  const auto probs = detail::softmax(detail::cell_logits(w, features));
  int decision = 0;
  if (stage == 1) {
    const auto tool_probs = detail::softmax(
        {params.tool_logits[0], params.tool_logits[1]});
    decision = greedy ? detail::argmax(tool_probs)
                      : sample_categorical(tool_probs, rng);
  }
  const int cell =
      greedy ? detail::argmax(probs) : sample_categorical(probs, rng);

  out.choice.decision = decision;
  out.choice.cell = cell;
  out.logprob = toy_logprob(params, out.choice);

  const Point center = cell_center(cell, view_dims, params.grid);
  if (stage == 2 || decision == 0) {
    out.text = make_answer_text(center);
  } else {
    out.text = make_crop_text(center, params.crop_fraction * view_dims.width,
                              params.crop_fraction * view_dims.height);
  }
  return out;
}

/// run_episode-compatible adapter. Knows the target color (the toy policy's
/// handcrafted perception), recomputes features per visible image, and
/// optionally traces every sampled choice for training.
struct ToyAgent {
  const ToyPolicyParams* params = nullptr;
  int target_color = 0;
  bool greedy = false;
  std::vector<ToyChoice>* trace = nullptr;

  std::string operator()(int stage, const std::string&, const Image& view,
                         Rng& rng) const {
    const auto features = cell_features(view, target_color, params->grid);
    auto res = toy_act(*params, stage, features, view.dims(), rng, greedy);
    if (trace) trace->push_back(std::move(res.choice));
    return res.text;
  }
};

}  // namespace guigaze
