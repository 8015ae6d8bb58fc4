// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ee2d/adapter.hpp"
#include "ee2d/dataset_io.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"
#include "ee2d/parallel.hpp"

namespace ee2d {

// Probe cell (i, k) is adapters[i] applied to embedding cell (i, k).
inline ProbeGrid apply_adapters(const EmbeddingGrid& emb,
                                std::span<const AdapterParams> adapters) {
  const std::size_t L = emb.num_layers(), m = emb.num_sentences();
  if (adapters.size() != L)
    throw DimensionMismatch("grid has " + std::to_string(L) + " layers but " +
                            std::to_string(adapters.size()) + " adapters were given");
  const std::size_t C = adapters[0].num_classes;
  for (std::size_t i = 0; i < L; ++i) {
    if (adapters[i].input_dim != emb.embed_dim())
      throw DimensionMismatch("adapter " + std::to_string(i) + " expects dimension " +
                              std::to_string(adapters[i].input_dim) + ", embeddings have " +
                              std::to_string(emb.embed_dim()));
    if (adapters[i].num_classes != C)
      throw DimensionMismatch("adapters disagree on the number of classes");
  }
  ProbeGrid out{emb.label, CellMatrix(L, m, C)};
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      auto probs = adapter_forward(adapters[i], emb.cells.cell(i, k));
      std::copy(probs.begin(), probs.end(), out.cells.cell(i, k).begin());
    }
  return out;
}

inline ProbeDataset apply_adapters(const EmbeddingDataset& ds,
                                   std::span<const AdapterParams> adapters,
                                   std::size_t threads = 1) {
  ProbeDataset out;
  out.manifest = ds.manifest;
  out.manifest.kind = GridKind::probe;
  out.manifest.embed_dim.reset();
  if (!adapters.empty()) out.manifest.num_classes = adapters[0].num_classes;
  out.grids.resize(ds.grids.size());
  parallel_for(ds.grids.size(), threads,
               [&](std::size_t n) { out.grids[n] = apply_adapters(ds.grids[n], adapters); });
  return out;
}

}  // namespace ee2d
