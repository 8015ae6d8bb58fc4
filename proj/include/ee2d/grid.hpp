// SPDX-License-Identifier: Apache-2.0
//
// Per-sample (layer x sentence) grids. A probe grid holds one class
// distribution per cell; an embedding grid holds one sentence embedding per
// cell. Cell (i, k) must depend on sentences 0..k only; nothing here can check
// that, producers guarantee it.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ee2d/error.hpp"

namespace ee2d {

inline constexpr double kDistributionTolerance = 1e-5;

// Dense L x m matrix of fixed-width real vectors, stored row-major by layer.
class CellMatrix {
 public:
  CellMatrix() = default;
  CellMatrix(std::size_t layers, std::size_t sentences, std::size_t width,
             double fill = 0.0)
      : layers_(layers),
        sentences_(sentences),
        width_(width),
        data_(layers * sentences * width, fill) {}

  std::size_t layers() const { return layers_; }
  std::size_t sentences() const { return sentences_; }
  std::size_t width() const { return width_; }

  std::span<const double> cell(std::size_t layer, std::size_t sentence) const {
    return {data_.data() + offset(layer, sentence), width_};
  }
  std::span<double> cell(std::size_t layer, std::size_t sentence) {
    return {data_.data() + offset(layer, sentence), width_};
  }

  std::span<const double> values() const { return data_; }

  bool operator==(const CellMatrix&) const = default;

 private:
  std::size_t offset(std::size_t layer, std::size_t sentence) const {
    return (layer * sentences_ + sentence) * width_;
  }

  std::size_t layers_ = 0;
  std::size_t sentences_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

struct ProbeGrid {
  int label = 0;
  CellMatrix cells;  // width = number of classes

  std::size_t num_layers() const { return cells.layers(); }
  std::size_t num_sentences() const { return cells.sentences(); }
  std::size_t num_classes() const { return cells.width(); }

  bool operator==(const ProbeGrid&) const = default;
};

struct EmbeddingGrid {
  int label = 0;
  CellMatrix cells;  // width = embedding dimension

  std::size_t num_layers() const { return cells.layers(); }
  std::size_t num_sentences() const { return cells.sentences(); }
  std::size_t embed_dim() const { return cells.width(); }

  bool operator==(const EmbeddingGrid&) const = default;
};

enum class GridKind { probe, embedding };

inline const char* to_string(GridKind k) {
  return k == GridKind::probe ? "probe" : "embedding";
}

struct DatasetManifest {
  GridKind kind = GridKind::probe;
  std::size_t num_classes = 0;
  std::size_t num_layers = 0;
  std::size_t samples = 0;
  std::optional<std::size_t> embed_dim;  // embedding datasets only
  std::vector<std::string> class_names;
  std::string provenance;

  bool operator==(const DatasetManifest&) const = default;
};

namespace detail {

inline std::string cell_context(std::size_t sample, std::size_t layer,
                                std::size_t sentence) {
  return "sample " + std::to_string(sample) + ", layer " +
         std::to_string(layer) + ", sentence " + std::to_string(sentence);
}

}  // namespace detail

// Throws NormalizationError unless `probs` is a distribution over >= 2
// classes summing to 1 within kDistributionTolerance.
inline void validate_distribution(std::span<const double> probs,
                                  const std::string& context = "distribution") {
  if (probs.size() < 2)
    throw SchemaError(context + ": need at least 2 classes, got " +
                      std::to_string(probs.size()));
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p))
      throw SchemaError(context + ": non-finite probability");
    if (p < 0.0)
      throw NormalizationError(context + ": negative probability " +
                               std::to_string(p));
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance)
    throw NormalizationError(context + ": probabilities sum to " +
                             std::to_string(sum));
}

inline void validate_probe_grid(const ProbeGrid& g, std::size_t sample = 0) {
  const auto where = "sample " + std::to_string(sample);
  if (g.num_layers() < 1 || g.num_sentences() < 1)
    throw SchemaError(where + ": grid needs at least one layer and sentence");
  if (g.label < 0 || static_cast<std::size_t>(g.label) >= g.num_classes())
    throw SchemaError(where + ": label " + std::to_string(g.label) +
                      " outside [0, " + std::to_string(g.num_classes()) + ")");
  for (std::size_t i = 0; i < g.num_layers(); ++i)
    for (std::size_t k = 0; k < g.num_sentences(); ++k)
      validate_distribution(g.cells.cell(i, k),
                            detail::cell_context(sample, i, k));
}

inline void validate_embedding_grid(const EmbeddingGrid& g,
                                    std::size_t num_classes,
                                    std::size_t sample = 0) {
  const auto where = "sample " + std::to_string(sample);
  if (g.num_layers() < 1 || g.num_sentences() < 1)
    throw SchemaError(where + ": grid needs at least one layer and sentence");
  if (g.embed_dim() < 1) throw SchemaError(where + ": embed_dim must be >= 1");
  if (g.label < 0 || static_cast<std::size_t>(g.label) >= num_classes)
    throw SchemaError(where + ": label " + std::to_string(g.label) +
                      " outside [0, " + std::to_string(num_classes) + ")");
  for (std::size_t i = 0; i < g.num_layers(); ++i)
    for (std::size_t k = 0; k < g.num_sentences(); ++k)
      for (double v : g.cells.cell(i, k))
        if (!std::isfinite(v))
          throw SchemaError(detail::cell_context(sample, i, k) +
                            ": non-finite embedding value");
}

// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < v.size(); ++c)
    if (v[c] > v[best]) best = c;
  return best;
}

}  // namespace ee2d
