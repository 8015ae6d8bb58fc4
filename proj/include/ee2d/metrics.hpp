// SPDX-License-Identifier: Apache-2.0
//
// Accuracy profiles, speed-up accounting and the per-layer FLOP cost model.
// One operation = one sentence through one layer.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ee2d/engine.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"
#include "ee2d/parallel.hpp"

namespace ee2d {

struct LayerAccuracyProfile {
  std::vector<double> acc;  // acc[layer]

  double max() const { return *std::max_element(acc.begin(), acc.end()); }
};

inline LayerAccuracyProfile layer_accuracy_profile(std::span<const ProbeGrid> data) {
  if (data.empty()) throw EmptyFilter("accuracy profile of an empty dataset");
  const std::size_t L = data[0].num_layers();
  std::vector<std::size_t> correct(L, 0);
  for (const auto& g : data)
    for (std::size_t l = 0; l < L; ++l)
      if (run_layerwise(g, l) == static_cast<std::size_t>(g.label)) ++correct[l];
  LayerAccuracyProfile p;
  for (auto c : correct) p.acc.push_back(static_cast<double>(c) / static_cast<double>(data.size()));
  return p;
}

// Best layer accuracy minus the allowed loss.
inline double accuracy_threshold(const LayerAccuracyProfile& profile, double allowed_loss) {
  if (!(allowed_loss >= 0.0 && allowed_loss < 1.0))
    throw ConfigError("allowed accuracy loss must lie in [0, 1)");
  return profile.max() - allowed_loss;
}

// First layer whose accuracy reaches `threshold`.
inline std::size_t optimal_exit_layer(const LayerAccuracyProfile& profile, double threshold) {
  for (std::size_t l = 0; l < profile.acc.size(); ++l)
    if (profile.acc[l] >= threshold) return l;
  throw NotReachable("no layer reaches accuracy " + std::to_string(threshold));
}

inline double speedup_layerwise(std::size_t num_layers, std::size_t exit_layer) {
  return static_cast<double>(num_layers) / static_cast<double>(exit_layer + 1);
}

inline double speedup_2d(std::size_t num_sentences, std::size_t num_layers,
                         std::size_t operations_used) {
  return static_cast<double>(num_sentences * num_layers) /
         static_cast<double>(operations_used);
}

struct SampleSummary {
  int label = 0;
  std::size_t prediction = 0;
  std::size_t num_sentences = 0;
  std::size_t operations_used = 0;
  bool exited_early = false;
  std::optional<TraversalStep> exit_step;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t total_ops = 0;
  std::size_t total_full_ops = 0;  // sum of m * L
  double speedup_total = 1.0;      // total_full_ops / total_ops
  double speedup_mean = 1.0;       // mean of per-sample ratios
  std::vector<SampleSummary> per_sample;
};

inline EvalReport evaluate_2d(std::span<const ProbeGrid> data, const EEConfig& cfg,
                              std::size_t threads = 1) {
  if (data.empty()) throw EmptyFilter("evaluation of an empty dataset");
  EvalReport r;
  r.per_sample.resize(data.size());
  parallel_for(data.size(), threads, [&](std::size_t n) {
    const auto o = run_2d(data[n], cfg);
    r.per_sample[n] = {data[n].label, o.predicted_label, data[n].num_sentences(),
                       o.operations_used, o.exited_early, o.exit_step};
  });
  std::size_t correct = 0;
  double ratio_sum = 0.0;
  const std::size_t L = data[0].num_layers();
  for (const auto& s : r.per_sample) {
    if (s.prediction == static_cast<std::size_t>(s.label)) ++correct;
    r.total_ops += s.operations_used;
    r.total_full_ops += s.num_sentences * L;
    ratio_sum += speedup_2d(s.num_sentences, L, s.operations_used);
  }
  const double n = static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.speedup_total = static_cast<double>(r.total_full_ops) / static_cast<double>(r.total_ops);
  r.speedup_mean = ratio_sum / n;
  return r;
}

using Heatmap = std::vector<std::vector<double>>;  // [row][column]

namespace detail {

inline std::vector<const ProbeGrid*> with_sentences(std::span<const ProbeGrid> data,
                                                    std::size_t fixed_m) {
  std::vector<const ProbeGrid*> out;
  for (const auto& g : data)
    if (g.num_sentences() == fixed_m) out.push_back(&g);
  if (out.empty())
    throw EmptyFilter("no sample has exactly " + std::to_string(fixed_m) + " sentences");
  return out;
}

}  // namespace detail

// Entry (i, k): fraction of samples whose cell (i, k) argmax is the label.
inline Heatmap cell_accuracy_heatmap(std::span<const ProbeGrid> data, std::size_t fixed_m) {
  const auto subset = detail::with_sentences(data, fixed_m);
  const std::size_t L = subset[0]->num_layers();
  std::vector<std::vector<std::size_t>> correct(L, std::vector<std::size_t>(fixed_m, 0));
  for (const auto* g : subset)
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t k = 0; k < fixed_m; ++k)
        if (argmax(g->cells.cell(i, k)) == static_cast<std::size_t>(g->label)) ++correct[i][k];
  Heatmap h(L, std::vector<double>(fixed_m));
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t k = 0; k < fixed_m; ++k)
      h[i][k] = static_cast<double>(correct[i][k]) / static_cast<double>(subset.size());
  return h;
}

// Entry s: accuracy of the prediction held when progression block s
// completes, i.e. the argmax at (active_layers(s) - 1, s).
inline std::vector<double> block_accuracy_curve(std::span<const ProbeGrid> data,
                                                std::size_t fixed_m) {
  const auto subset = detail::with_sentences(data, fixed_m);
  const std::size_t L = subset[0]->num_layers();
  std::vector<double> out(fixed_m, 0.0);
  for (std::size_t s = 0; s < fixed_m; ++s) {
    const std::size_t layer = active_layers(L, fixed_m, s) - 1;
    std::size_t correct = 0;
    for (const auto* g : subset)
      if (argmax(g->cells.cell(layer, s)) == static_cast<std::size_t>(g->label)) ++correct;
    out[s] = static_cast<double>(correct) / static_cast<double>(subset.size());
  }
  return out;
}

inline void write_heatmap_csv(std::ostream& out, const Heatmap& h) {
  out << "layer\\sentence";
  const std::size_t cols = h.empty() ? 0 : h[0].size();
  for (std::size_t k = 0; k < cols; ++k) out << ',' << k;
  out << '\n';
  for (std::size_t i = 0; i < h.size(); ++i) {
    out << i;
    for (double v : h[i]) out << ',' << v;
    out << '\n';
  }
}

inline void write_block_csv(std::ostream& out, std::span<const double> blocks) {
  out << "block,accuracy\n";
  for (std::size_t s = 0; s < blocks.size(); ++s) out << s << ',' << blocks[s] << '\n';
}

// ---------------------------------------------------------------------------
// FLOP cost of one transformer layer processing the s-th sentence.

struct CostModelInput {
  double tokens_per_sentence = 15.0;
  double embed_dim = 3072.0;
  double mlp_expansion = 2.67;
  double sentence_index = 0.0;
};

struct CostModelResult {
  double qkv_flops = 0.0;              // 3 * tps * D^2
  double attention_coefficient = 0.0;  // tps^2 * D, per unit of s
  double attention_flops = 0.0;        // s * tps^2 * D
  double mlp_flops = 0.0;              // 2 * tps * D^2 * exp_f
  double crossover_s = 0.0;            // s where attention equals qkv + mlp
};

inline CostModelResult cost_model(const CostModelInput& in) {
  if (!(in.tokens_per_sentence > 0 && in.embed_dim > 0 && in.mlp_expansion > 0 &&
        in.sentence_index >= 0))
    throw ConfigError("cost model inputs must be positive (sentence index >= 0)");
  const double tps = in.tokens_per_sentence, d = in.embed_dim;
  CostModelResult r;
  r.qkv_flops = 3.0 * tps * d * d;
  r.attention_coefficient = tps * tps * d;
  r.attention_flops = in.sentence_index * r.attention_coefficient;
  r.mlp_flops = 2.0 * tps * d * d * in.mlp_expansion;
  r.crossover_s = (r.qkv_flops + r.mlp_flops) / r.attention_coefficient;
  return r;
}

}  // namespace ee2d
