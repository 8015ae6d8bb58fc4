// SPDX-License-Identifier: Apache-2.0
//
// Two-dimensional early-exit inference over a probe grid.
//
// Sentences arrive one at a time. When sentence s arrives the first
// min((s+1)*step, L) layers are active: every earlier sentence is pushed
// through the newly activated layers, then sentence s runs through all active
// layers. Each (layer, sentence) evaluation is one operation. A cell whose
// confidence margin exceeds tau_ignore adds that margin to its predicted
// class's accumulator; the first accumulator to exceed tau_acc ends inference.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"

namespace ee2d {

struct EEConfig {
  double tau_ignore = 0.0;
  double tau_acc = 0.0;

  void validate() const {
    if (!std::isfinite(tau_ignore) || tau_ignore < 0.0 || tau_ignore > 1.0)
      throw ConfigError("tau_ignore must lie in [0, 1]");
    if (!std::isfinite(tau_acc) || tau_acc < 0.0)
      throw ConfigError("tau_acc must be finite and >= 0");
  }
};

struct TraversalStep {
  std::size_t layer = 0;
  std::size_t sentence = 0;
  std::size_t op_index = 0;

  bool operator==(const TraversalStep&) const = default;
};

struct EEOutcome {
  std::size_t predicted_label = 0;
  std::size_t operations_used = 0;
  bool exited_early = false;
  std::optional<TraversalStep> exit_step;
  std::vector<double> accumulators;
};

inline std::size_t step_size(std::size_t num_layers, std::size_t num_sentences) {
  return std::max<std::size_t>(1, num_layers / num_sentences);
}

// Number of layers active once sentence `s` has arrived.
inline std::size_t active_layers(std::size_t num_layers, std::size_t num_sentences,
                                 std::size_t s) {
  return std::min((s + 1) * step_size(num_layers, num_sentences), num_layers);
}

// Deepest layer the plan ever reaches.
inline std::size_t deepest_visited_layer(std::size_t num_layers,
                                         std::size_t num_sentences) {
  return active_layers(num_layers, num_sentences, num_sentences - 1) - 1;
}

// Calls visit(layer, sentence) in execution order until it returns false.
// Returns the number of steps visited.
template <class Visit>
std::size_t walk_plan(std::size_t num_layers, std::size_t num_sentences,
                      Visit&& visit) {
  const std::size_t step = step_size(num_layers, num_sentences);
  std::size_t ops = 0;
  for (std::size_t s = 0; s < num_sentences; ++s) {
    const std::size_t layers_to_traverse = std::min((s + 1) * step, num_layers);
    for (std::size_t s1 = 0; s1 <= s; ++s1) {
      const std::size_t start_layer = s1 == s ? 0 : step * s;
      for (std::size_t l = start_layer; l < layers_to_traverse; ++l) {
        ++ops;
        if (!visit(l, s1)) return ops;
      }
    }
  }
  return ops;
}

inline std::vector<TraversalStep> traversal_plan(std::size_t num_layers,
                                                 std::size_t num_sentences) {
  std::vector<TraversalStep> plan;
  walk_plan(num_layers, num_sentences, [&](std::size_t l, std::size_t s) {
    plan.push_back({l, s, plan.size()});
    return true;
  });
  return plan;
}

inline std::size_t plan_length(std::size_t num_layers, std::size_t num_sentences) {
  return walk_plan(num_layers, num_sentences,
                   [](std::size_t, std::size_t) { return true; });
}

// Margin between the largest and second-largest probability.
inline double confidence(std::span<const double> probs) {
  double first = -1.0, second = -1.0;
  for (double p : probs) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  return first - second;
}

inline EEOutcome run_2d(const ProbeGrid& grid, const EEConfig& cfg) {
  const std::size_t L = grid.num_layers(), m = grid.num_sentences();
  EEOutcome out;
  out.accumulators.assign(grid.num_classes(), 0.0);
  std::size_t op = 0;
  out.operations_used = walk_plan(L, m, [&](std::size_t l, std::size_t s) {
    const std::size_t this_op = op++;
    const auto probs = grid.cells.cell(l, s);
    const double conf = confidence(probs);
    if (conf > cfg.tau_ignore) {
      const std::size_t label = argmax(probs);
      out.accumulators[label] += conf;
      if (out.accumulators[label] > cfg.tau_acc) {
        out.predicted_label = label;
        out.exited_early = true;
        out.exit_step = TraversalStep{l, s, this_op};
        return false;
      }
    }
    return true;
  });
  if (!out.exited_early)
    out.predicted_label = argmax(grid.cells.cell(deepest_visited_layer(L, m), m - 1));
  return out;
}

// Layer-wise baseline: the classifier at `exit_layer` reads the last sentence.
inline std::size_t run_layerwise(const ProbeGrid& grid, std::size_t exit_layer) {
  if (exit_layer >= grid.num_layers())
    throw ConfigError("exit layer " + std::to_string(exit_layer) +
                      " outside [0, " + std::to_string(grid.num_layers()) + ")");
  return argmax(grid.cells.cell(exit_layer, grid.num_sentences() - 1));
}

inline std::size_t run_full(const ProbeGrid& grid) {
  return run_layerwise(grid, grid.num_layers() - 1);
}

}  // namespace ee2d
