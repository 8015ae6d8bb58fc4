// SPDX-License-Identifier: Apache-2.0
//
// JSON Lines persistence. Line 1 of a dataset file is the manifest
//
//   {"kind":"probe"|"embedding","num_classes":C,"num_layers":L,"samples":N,
//    "embed_dim":D,"provenance":"...","class_names":[...]}
//
// and every following line is one sample {"label":y,"cells":[[[...]]]} with
// cells[layer][sentence] a length-C distribution (probe) or a length-D
// embedding. Doubles are written in shortest round-trip form, so
// load(save(x)) == x bit for bit. The number of sentences may vary per
// sample; L, C (and D) may not.
//
// Adapter files hold one adapter per line:
//   {"layer":i,"w1":[[..]],"b1":[..],"w2":[[..]],"b2":[..]}
#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ee2d/adapter.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"

namespace ee2d {

struct ProbeDataset {
  DatasetManifest manifest;
  std::vector<ProbeGrid> grids;
};

struct EmbeddingDataset {
  DatasetManifest manifest;
  std::vector<EmbeddingGrid> grids;
};

using AnyDataset = std::variant<ProbeDataset, EmbeddingDataset>;

namespace detail {

using json = nlohmann::json;

inline std::string at_line(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

inline std::size_t get_count(const json& j, const char* key,
                             const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw SchemaError(where + ": field '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

inline DatasetManifest parse_manifest(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": manifest must be a JSON object");
  DatasetManifest m;
  if (!j.contains("kind") || !j.at("kind").is_string())
    throw SchemaError(where + ": missing string field 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "probe") m.kind = GridKind::probe;
  else if (kind == "embedding") m.kind = GridKind::embedding;
  else throw SchemaError(where + ": unknown kind '" + kind + "'");
  m.num_classes = get_count(j, "num_classes", where);
  m.num_layers = get_count(j, "num_layers", where);
  m.samples = get_count(j, "samples", where);
  if (m.num_classes < 2) throw SchemaError(where + ": num_classes must be >= 2");
  if (m.num_layers < 1) throw SchemaError(where + ": num_layers must be >= 1");
  if (m.samples < 1) throw SchemaError(where + ": samples must be >= 1");
  if (j.contains("embed_dim")) m.embed_dim = get_count(j, "embed_dim", where);
  if (m.kind == GridKind::embedding && !m.embed_dim)
    throw SchemaError(where + ": embedding manifest needs 'embed_dim'");
  if (m.embed_dim && *m.embed_dim < 1)
    throw SchemaError(where + ": embed_dim must be >= 1");
  if (j.contains("provenance")) {
    if (!j.at("provenance").is_string())
      throw SchemaError(where + ": 'provenance' must be a string");
    m.provenance = j.at("provenance").get<std::string>();
  }
  if (j.contains("class_names")) {
    const auto& names = j.at("class_names");
    if (!names.is_array() || names.size() != m.num_classes)
      throw SchemaError(where + ": 'class_names' must list num_classes strings");
    for (const auto& n : names) {
      if (!n.is_string()) throw SchemaError(where + ": class name must be a string");
      m.class_names.push_back(n.get<std::string>());
    }
  }
  return m;
}

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["num_classes"] = m.num_classes;
  j["num_layers"] = m.num_layers;
  j["samples"] = m.samples;
  if (m.embed_dim) j["embed_dim"] = *m.embed_dim;
  j["provenance"] = m.provenance;
  if (!m.class_names.empty()) j["class_names"] = m.class_names;
  return j;
}

inline std::vector<double> parse_vector(const json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw SchemaError(where + ": non-numeric value");
    out.push_back(x.get<double>());
  }
  return out;
}

// Parses "cells" into a matrix; ragged input is a schema error, a width that
// disagrees with the manifest is a shape error.
inline CellMatrix parse_cells(const json& sample, std::size_t expected_layers,
                              std::size_t expected_width, const std::string& where) {
  if (!sample.contains("cells") || !sample.at("cells").is_array())
    throw SchemaError(where + ": missing array field 'cells'");
  const auto& rows = sample.at("cells");
  if (rows.size() != expected_layers)
    throw InconsistentShape(where + ": sample has " + std::to_string(rows.size()) +
                            " layers, manifest says " + std::to_string(expected_layers));
  if (!rows[0].is_array() || rows[0].empty())
    throw SchemaError(where + ": layer 0 has no sentences");
  const std::size_t m = rows[0].size();
  CellMatrix cells(expected_layers, m, expected_width);
  for (std::size_t i = 0; i < expected_layers; ++i) {
    if (!rows[i].is_array() || rows[i].size() != m)
      throw SchemaError(where + ": ragged matrix, layer " + std::to_string(i) +
                        " does not have " + std::to_string(m) + " sentences");
    for (std::size_t k = 0; k < m; ++k) {
      const auto ctx = where + ", layer " + std::to_string(i) + ", sentence " +
                       std::to_string(k);
      auto v = parse_vector(rows[i][k], ctx);
      if (v.size() != expected_width)
        throw InconsistentShape(ctx + ": vector of length " + std::to_string(v.size()) +
                                ", expected " + std::to_string(expected_width));
      std::copy(v.begin(), v.end(), cells.cell(i, k).begin());
    }
  }
  return cells;
}

inline int parse_label(const json& sample, const std::string& where) {
  if (!sample.contains("label") || !sample.at("label").is_number_integer())
    throw SchemaError(where + ": missing integer field 'label'");
  return sample.at("label").get<int>();
}

inline json cells_to_json(const CellMatrix& cells) {
  json rows = json::array();
  for (std::size_t i = 0; i < cells.layers(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < cells.sentences(); ++k) {
      auto c = cells.cell(i, k);
      row.push_back(std::vector<double>(c.begin(), c.end()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json parse_line(const std::string& line, const std::string& where) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(where + ": invalid JSON (" + e.what() + ")");
  }
}

template <class Grid>
void check_before_save(const DatasetManifest& m, const std::vector<Grid>& grids) {
  if (grids.empty()) throw SchemaError("dataset must contain at least one sample");
  if (m.samples != grids.size())
    throw SchemaError("manifest says " + std::to_string(m.samples) + " samples, got " +
                      std::to_string(grids.size()));
  for (std::size_t n = 0; n < grids.size(); ++n) {
    if (grids[n].num_layers() != m.num_layers)
      throw InconsistentShape("sample " + std::to_string(n) + " has " +
                              std::to_string(grids[n].num_layers()) +
                              " layers, manifest says " + std::to_string(m.num_layers));
  }
}

// Runs a grid validator, prefixing any failure with the file position.
template <class Validate>
void validate_at(const std::string& where, Validate&& validate) {
  try {
    validate();
  } catch (const NormalizationError& e) {
    throw NormalizationError(where + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

}  // namespace detail

// Reads a dataset of either kind. `source` names the stream in errors.
inline AnyDataset read_dataset(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  do {
    if (!std::getline(in, line)) throw SchemaError(source + ": empty file, missing manifest");
    ++lineno;
  } while (line.find_first_not_of(" \t\r") == std::string::npos);
  const auto manifest =
      detail::parse_manifest(detail::parse_line(line, detail::at_line(source, lineno)),
                             detail::at_line(source, lineno));

  ProbeDataset probes{manifest, {}};
  EmbeddingDataset embeddings{manifest, {}};
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = detail::at_line(source, lineno) + " (sample " + std::to_string(count) + ")";
    const auto j = detail::parse_line(line, where);
    if (!j.is_object()) throw SchemaError(where + ": sample must be a JSON object");
    const int label = detail::parse_label(j, where);
    if (manifest.kind == GridKind::probe) {
      ProbeGrid g{label, detail::parse_cells(j, manifest.num_layers, manifest.num_classes, where)};
      detail::validate_at(detail::at_line(source, lineno), [&] { validate_probe_grid(g, count); });
      probes.grids.push_back(std::move(g));
    } else {
      EmbeddingGrid g{label, detail::parse_cells(j, manifest.num_layers, *manifest.embed_dim, where)};
      detail::validate_at(detail::at_line(source, lineno),
                          [&] { validate_embedding_grid(g, manifest.num_classes, count); });
      embeddings.grids.push_back(std::move(g));
    }
    ++count;
  }
  if (count != manifest.samples)
    throw SchemaError(source + ": manifest declares " + std::to_string(manifest.samples) +
                      " samples, file contains " + std::to_string(count));
  if (manifest.kind == GridKind::probe) return probes;
  return embeddings;
}

inline AnyDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_dataset(in, path);
}

inline ProbeDataset load_probe_dataset(const std::string& path) {
  auto any = load_dataset(path);
  if (auto* p = std::get_if<ProbeDataset>(&any)) return std::move(*p);
  throw SchemaError(path + ": expected a probe dataset, found an embedding dataset");
}

inline EmbeddingDataset load_embedding_dataset(const std::string& path) {
  auto any = load_dataset(path);
  if (auto* e = std::get_if<EmbeddingDataset>(&any)) return std::move(*e);
  throw SchemaError(path + ": expected an embedding dataset, found a probe dataset");
}

inline void write_dataset(std::ostream& out, const ProbeDataset& ds) {
  detail::check_before_save(ds.manifest, ds.grids);
  if (ds.manifest.kind != GridKind::probe) throw SchemaError("manifest kind must be 'probe'");
  for (std::size_t n = 0; n < ds.grids.size(); ++n) {
    if (ds.grids[n].num_classes() != ds.manifest.num_classes)
      throw InconsistentShape("sample " + std::to_string(n) + " has " +
                              std::to_string(ds.grids[n].num_classes()) + " classes");
    validate_probe_grid(ds.grids[n], n);
  }
  out << detail::manifest_to_json(ds.manifest).dump() << '\n';
  for (const auto& g : ds.grids) {
    nlohmann::json j;
    j["label"] = g.label;
    j["cells"] = detail::cells_to_json(g.cells);
    out << j.dump() << '\n';
  }
}

inline void write_dataset(std::ostream& out, const EmbeddingDataset& ds) {
  detail::check_before_save(ds.manifest, ds.grids);
  if (ds.manifest.kind != GridKind::embedding || !ds.manifest.embed_dim)
    throw SchemaError("manifest must be of kind 'embedding' with embed_dim");
  for (std::size_t n = 0; n < ds.grids.size(); ++n) {
    if (ds.grids[n].embed_dim() != *ds.manifest.embed_dim)
      throw InconsistentShape("sample " + std::to_string(n) + " has embed_dim " +
                              std::to_string(ds.grids[n].embed_dim()));
    validate_embedding_grid(ds.grids[n], ds.manifest.num_classes, n);
  }
  out << detail::manifest_to_json(ds.manifest).dump() << '\n';
  for (const auto& g : ds.grids) {
    nlohmann::json j;
    j["label"] = g.label;
    j["cells"] = detail::cells_to_json(g.cells);
    out << j.dump() << '\n';
  }
}

template <class Dataset>
void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(out, ds);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Adapter files

inline nlohmann::json adapter_to_json(const AdapterParams& p, std::size_t layer) {
  auto matrix = [](const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    nlohmann::json m = nlohmann::json::array();
    for (std::size_t r = 0; r < rows; ++r)
      m.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                      flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
    return m;
  };
  nlohmann::json j;
  j["layer"] = layer;
  j["w1"] = matrix(p.w1, p.input_dim, p.hidden_dim);
  j["b1"] = p.b1;
  j["w2"] = matrix(p.w2, p.hidden_dim, p.num_classes);
  j["b2"] = p.b2;
  return j;
}

inline AdapterParams adapter_from_json(const nlohmann::json& j, const std::string& where) {
  auto matrix = [&](const char* key, std::size_t& rows, std::size_t& cols) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).empty())
      throw SchemaError(where + ": missing or empty matrix '" + key + "'");
    const auto& m = j.at(key);
    rows = m.size();
    std::vector<double> flat;
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = detail::parse_vector(m[r], where + ", " + key);
      if (r == 0) cols = row.size();
      if (row.size() != cols || cols == 0)
        throw SchemaError(where + ": ragged matrix '" + key + "'");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
  };
  AdapterParams p;
  std::size_t h2 = 0;
  p.w1 = matrix("w1", p.input_dim, p.hidden_dim);
  p.w2 = matrix("w2", h2, p.num_classes);
  if (!j.contains("b1") || !j.contains("b2"))
    throw SchemaError(where + ": missing bias 'b1' or 'b2'");
  p.b1 = detail::parse_vector(j.at("b1"), where + ", b1");
  p.b2 = detail::parse_vector(j.at("b2"), where + ", b2");
  if (h2 != p.hidden_dim)
    throw SchemaError(where + ": w2 has " + std::to_string(h2) + " rows, w1 has " +
                      std::to_string(p.hidden_dim) + " columns");
  p.check_shape();
  return p;
}

inline std::vector<AdapterParams> read_adapters(std::istream& in,
                                                const std::string& source = "<stream>") {
  std::vector<std::optional<AdapterParams>> slots;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = detail::at_line(source, lineno);
    const auto j = detail::parse_line(line, where);
    if (!j.is_object()) throw SchemaError(where + ": adapter must be a JSON object");
    const std::size_t layer = detail::get_count(j, "layer", where);
    if (layer >= slots.size()) slots.resize(layer + 1);
    if (slots[layer]) throw SchemaError(where + ": duplicate adapter for layer " + std::to_string(layer));
    slots[layer] = adapter_from_json(j, where);
  }
  if (slots.empty()) throw SchemaError(source + ": no adapters");
  std::vector<AdapterParams> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) throw SchemaError(source + ": no adapter for layer " + std::to_string(i));
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

inline std::vector<AdapterParams> load_adapters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_adapters(in, path);
}

inline void write_adapters(std::ostream& out, std::span<const AdapterParams> adapters) {
  for (std::size_t i = 0; i < adapters.size(); ++i)
    out << adapter_to_json(adapters[i], i).dump() << '\n';
}

inline void save_adapters(std::span<const AdapterParams> adapters, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_adapters(out, adapters);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace ee2d
