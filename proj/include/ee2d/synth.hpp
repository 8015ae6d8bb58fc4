// SPDX-License-Identifier: Apache-2.0
//
// Synthetic embedding grids with a controllable schedule of class signal.
//
// Class c points along the unit basis vector e_c. Cell (i, k) of a sample
// with label y is
//
//   layer_ramp[i] * s_k * e_y + N(0, noise_sigma^2 I)
//
// with s_k = sentence_ramp[k] in `local` context mode, or
// s_k = max_{t <= k} sentence_ramp[t] in `cumulative` mode, where a sentence's
// representation also carries whatever earlier sentences revealed (as a
// causally masked model's pooled state would). Either way cell (i, k) depends
// on sentences 0..k only.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "ee2d/dataset_io.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"
#include "ee2d/parallel.hpp"
#include "ee2d/seed.hpp"

namespace ee2d {

enum class SignalContext { local, cumulative };

struct SynthSpec {
  std::size_t num_samples = 100;
  std::size_t num_classes = 2;
  std::size_t num_layers = 8;
  std::size_t min_sentences = 4;
  std::size_t max_sentences = 4;
  std::size_t embed_dim = 8;
  std::vector<double> layer_ramp;     // length num_layers; empty = all ones
  std::vector<double> sentence_ramp;  // length max_sentences; empty = all ones
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  SignalContext context = SignalContext::local;

  void validate() const {
    if (num_samples < 1) throw SpecError("num_samples must be >= 1");
    if (num_classes < 2) throw SpecError("num_classes must be >= 2");
    if (num_layers < 1) throw SpecError("num_layers must be >= 1");
    if (min_sentences < 1 || min_sentences > max_sentences)
      throw SpecError("sentence range must satisfy 1 <= min <= max");
    if (embed_dim < num_classes)
      throw SpecError("embed_dim (" + std::to_string(embed_dim) +
                      ") must be >= num_classes (" + std::to_string(num_classes) + ")");
    if (!layer_ramp.empty() && layer_ramp.size() != num_layers)
      throw SpecError("layer_ramp has length " + std::to_string(layer_ramp.size()) +
                      ", expected num_layers = " + std::to_string(num_layers));
    if (!sentence_ramp.empty() && sentence_ramp.size() != max_sentences)
      throw SpecError("sentence_ramp has length " + std::to_string(sentence_ramp.size()) +
                      ", expected max sentences = " + std::to_string(max_sentences));
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!std::all_of(layer_ramp.begin(), layer_ramp.end(), in_unit) ||
        !std::all_of(sentence_ramp.begin(), sentence_ramp.end(), in_unit))
      throw SpecError("ramp multipliers must lie in [0, 1]");
    if (!(noise_sigma >= 0.0)) throw SpecError("noise_sigma must be >= 0");
  }
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.num_samples = j.at("num_samples").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.num_layers = j.at("num_layers").get<std::size_t>();
    s.embed_dim = j.at("embed_dim").get<std::size_t>();
    const auto& m = j.at("sentences");
    if (m.is_array()) {
      if (m.size() != 2) throw SpecError("'sentences' range must be [min, max]");
      s.min_sentences = m[0].get<std::size_t>();
      s.max_sentences = m[1].get<std::size_t>();
    } else {
      s.min_sentences = s.max_sentences = m.get<std::size_t>();
    }
    if (j.contains("layer_ramp")) s.layer_ramp = j.at("layer_ramp").get<std::vector<double>>();
    if (j.contains("sentence_ramp"))
      s.sentence_ramp = j.at("sentence_ramp").get<std::vector<double>>();
    if (j.contains("noise_sigma")) s.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("context")) {
      const auto c = j.at("context").get<std::string>();
      if (c == "local") s.context = SignalContext::local;
      else if (c == "cumulative") s.context = SignalContext::cumulative;
      else throw SpecError("unknown context '" + c + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

// Balanced labels (class counts differ by at most one), seeded order.
inline std::vector<int> balanced_labels(std::size_t n, std::size_t num_classes,
                                        std::uint64_t seed) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % num_classes);
  std::mt19937_64 rng(mix_seed(seed, ~std::uint64_t{0}));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

inline std::vector<EmbeddingGrid> generate_dataset(const SynthSpec& spec,
                                                   std::size_t threads = 1) {
  spec.validate();
  const auto labels = balanced_labels(spec.num_samples, spec.num_classes, spec.seed);
  auto layer_ramp = spec.layer_ramp.empty() ? std::vector<double>(spec.num_layers, 1.0)
                                            : spec.layer_ramp;
  auto sentence_ramp = spec.sentence_ramp.empty()
                           ? std::vector<double>(spec.max_sentences, 1.0)
                           : spec.sentence_ramp;
  if (spec.context == SignalContext::cumulative)
    for (std::size_t k = 1; k < sentence_ramp.size(); ++k)
      sentence_ramp[k] = std::max(sentence_ramp[k], sentence_ramp[k - 1]);

  std::vector<EmbeddingGrid> out(spec.num_samples);
  parallel_for(spec.num_samples, threads, [&](std::size_t n) {
    std::mt19937_64 rng(mix_seed(spec.seed, n));
    std::uniform_int_distribution<std::size_t> pick_m(spec.min_sentences, spec.max_sentences);
    const std::size_t m = pick_m(rng);
    std::normal_distribution<double> noise(0.0, 1.0);
    EmbeddingGrid g{labels[n], CellMatrix(spec.num_layers, m, spec.embed_dim)};
    const auto y = static_cast<std::size_t>(labels[n]);
    for (std::size_t i = 0; i < spec.num_layers; ++i)
      for (std::size_t k = 0; k < m; ++k) {
        auto cell = g.cells.cell(i, k);
        if (spec.noise_sigma > 0.0)
          for (auto& v : cell) v = spec.noise_sigma * noise(rng);
        cell[y] += layer_ramp[i] * sentence_ramp[k];
      }
    out[n] = std::move(g);
  });
  return out;
}

inline EmbeddingDataset generate_embedding_dataset(const SynthSpec& spec,
                                                   std::size_t threads = 1) {
  EmbeddingDataset ds;
  ds.grids = generate_dataset(spec, threads);
  ds.manifest.kind = GridKind::embedding;
  ds.manifest.num_classes = spec.num_classes;
  ds.manifest.num_layers = spec.num_layers;
  ds.manifest.samples = spec.num_samples;
  ds.manifest.embed_dim = spec.embed_dim;
  ds.manifest.provenance = "synthetic seed=" + std::to_string(spec.seed) +
                           " noise_sigma=" + std::to_string(spec.noise_sigma) +
                           (spec.context == SignalContext::cumulative ? " context=cumulative"
                                                                      : " context=local");
  return ds;
}

}  // namespace ee2d
