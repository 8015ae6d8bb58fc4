// SPDX-License-Identifier: Apache-2.0
//
// Per-layer classification adapter: Linear(D -> H) + ReLU, Linear(H -> C) +
// softmax. Also the two training objectives over embedding grids and their
// analytic gradients:
//
//   adapter loss   CE(y, fc_i(mean_k e_{i,k}))
//   fine-tune loss sum_i lambda_i CE(y, fc_i(mean_j pe_{i,j}))
//
// where pe_{i,j} is the mean of the first j+1 sentence embeddings of layer i.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"

namespace ee2d {

inline constexpr std::size_t kDefaultHiddenDim = 256;
inline constexpr double kProbabilityFloor = 1e-12;

struct AdapterParams {
  std::size_t input_dim = 0;   // D
  std::size_t hidden_dim = 0;  // H
  std::size_t num_classes = 0; // C
  std::vector<double> w1;      // D x H, row-major
  std::vector<double> b1;      // H
  std::vector<double> w2;      // H x C, row-major
  std::vector<double> b2;      // C

  static AdapterParams zeros(std::size_t d, std::size_t h, std::size_t c) {
    return {d, h, c, std::vector<double>(d * h), std::vector<double>(h),
            std::vector<double>(h * c), std::vector<double>(c)};
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  template <class Rng>
  static AdapterParams random(std::size_t d, std::size_t h, std::size_t c,
                              Rng& rng) {
    auto p = zeros(d, h, c);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(h));
    std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
    for (auto& v : p.w1) v = u1(rng);
    for (auto& v : p.b1) v = u1(rng);
    for (auto& v : p.w2) v = u2(rng);
    for (auto& v : p.b2) v = u2(rng);
    return p;
  }

  std::size_t parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }

  // Flat view: w1, b1, w2, b2 concatenated.
  double& at(std::size_t idx) { return const_cast<double&>(std::as_const(*this).at(idx)); }
  const double& at(std::size_t idx) const {
    if (idx < w1.size()) return w1[idx];
    idx -= w1.size();
    if (idx < b1.size()) return b1[idx];
    idx -= b1.size();
    if (idx < w2.size()) return w2[idx];
    idx -= w2.size();
    return b2.at(idx);
  }

  template <class F>
  void for_each_array(F&& f) {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
  }

  void check_shape() const {
    if (hidden_dim < 1) throw SchemaError("adapter hidden_dim must be >= 1");
    if (w1.size() != input_dim * hidden_dim || b1.size() != hidden_dim ||
        w2.size() != hidden_dim * num_classes || b2.size() != num_classes)
      throw SchemaError("adapter parameter arrays do not match its shape");
    for (std::size_t i = 0; i < parameter_count(); ++i)
      if (!std::isfinite(at(i))) throw SchemaError("adapter has non-finite parameter");
  }

  bool operator==(const AdapterParams&) const = default;
};

namespace detail {

struct ForwardState {
  std::vector<double> pre;     // w1^T x + b1
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> probs;
};

inline void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

inline ForwardState forward(const AdapterParams& p, std::span<const double> x) {
  if (x.size() != p.input_dim)
    throw DimensionMismatch("adapter expects input of dimension " +
                            std::to_string(p.input_dim) + ", got " +
                            std::to_string(x.size()));
  const std::size_t H = p.hidden_dim, C = p.num_classes;
  ForwardState s;
  s.pre.assign(p.b1.begin(), p.b1.end());
  for (std::size_t d = 0; d < p.input_dim; ++d) {
    const double xd = x[d];
    if (xd == 0.0) continue;
    const double* row = p.w1.data() + d * H;
    for (std::size_t j = 0; j < H; ++j) s.pre[j] += xd * row[j];
  }
  s.hidden.resize(H);
  // NaN passes through so overflow surfaces as a non-finite loss.
  for (std::size_t j = 0; j < H; ++j)
    s.hidden[j] = std::isnan(s.pre[j]) ? s.pre[j] : std::max(0.0, s.pre[j]);
  s.probs.assign(p.b2.begin(), p.b2.end());
  for (std::size_t j = 0; j < H; ++j) {
    const double hj = s.hidden[j];
    if (hj == 0.0) continue;  // NaN is not skipped
    const double* row = p.w2.data() + j * C;
    for (std::size_t c = 0; c < C; ++c) s.probs[c] += hj * row[c];
  }
  softmax_inplace(s.probs);
  return s;
}

}  // namespace detail

inline std::vector<double> adapter_forward(const AdapterParams& p,
                                           std::span<const double> x) {
  return detail::forward(p, x).probs;
}

inline double cross_entropy(std::span<const double> probs, std::size_t label) {
  return -std::log(std::max(probs[label], kProbabilityFloor));
}

// CE(y, fc(x)); when `grad` is non-null adds weight * dCE/dtheta into it.
inline double adapter_ce(const AdapterParams& p, std::span<const double> x,
                         std::size_t label, AdapterParams* grad = nullptr,
                         double weight = 1.0) {
  auto s = detail::forward(p, x);
  const double loss = cross_entropy(s.probs, label);
  if (grad == nullptr || weight == 0.0) return loss;
  // Below the floor the clamped loss is locally constant.
  if (s.probs[label] < kProbabilityFloor) return loss;

  const std::size_t H = p.hidden_dim, C = p.num_classes;
  std::vector<double> dz(s.probs);
  dz[label] -= 1.0;
  for (auto& v : dz) v *= weight;

  std::vector<double> da(H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    const double* w2row = p.w2.data() + j * C;
    double* g2row = grad->w2.data() + j * C;
    double dh = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      g2row[c] += s.hidden[j] * dz[c];
      dh += w2row[c] * dz[c];
    }
    da[j] = s.pre[j] > 0.0 ? dh : 0.0;
  }
  for (std::size_t c = 0; c < C; ++c) grad->b2[c] += dz[c];
  for (std::size_t j = 0; j < H; ++j) grad->b1[j] += da[j];
  for (std::size_t d = 0; d < p.input_dim; ++d) {
    const double xd = x[d];
    if (xd == 0.0) continue;
    double* g1row = grad->w1.data() + d * H;
    for (std::size_t j = 0; j < H; ++j) g1row[j] += xd * da[j];
  }
  return loss;
}

// Mean of the m sentence embeddings of `layer`.
inline std::vector<double> mean_embedding(const EmbeddingGrid& emb,
                                          std::size_t layer) {
  std::vector<double> out(emb.embed_dim(), 0.0);
  const std::size_t m = emb.num_sentences();
  for (std::size_t k = 0; k < m; ++k) {
    auto e = emb.cells.cell(layer, k);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += e[d];
  }
  for (auto& v : out) v /= static_cast<double>(m);
  return out;
}

// out[j] = mean of sentence embeddings 0..j at `layer`, for j = 0..m-1.
inline std::vector<std::vector<double>> prefix_embeddings(
    const EmbeddingGrid& emb, std::size_t layer) {
  const std::size_t m = emb.num_sentences(), D = emb.embed_dim();
  std::vector<std::vector<double>> out;
  out.reserve(m);
  std::vector<double> running(D, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    auto e = emb.cells.cell(layer, j);
    for (std::size_t d = 0; d < D; ++d) running[d] += e[d];
    std::vector<double> pe(running);
    for (auto& v : pe) v /= static_cast<double>(j + 1);
    out.push_back(std::move(pe));
  }
  return out;
}

// Classifier input of the fine-tune loss: the average of all m prefix means.
inline std::vector<double> mean_of_prefixes(const EmbeddingGrid& emb,
                                            std::size_t layer) {
  auto prefixes = prefix_embeddings(emb, layer);
  std::vector<double> out(emb.embed_dim(), 0.0);
  for (const auto& pe : prefixes)
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += pe[d];
  for (auto& v : out) v /= static_cast<double>(prefixes.size());
  return out;
}

inline double adapter_loss(const AdapterParams& p, const EmbeddingGrid& emb,
                           std::size_t layer, AdapterParams* grad = nullptr,
                           double weight = 1.0) {
  return adapter_ce(p, mean_embedding(emb, layer),
                    static_cast<std::size_t>(emb.label), grad, weight);
}

inline double aggregate_ft_loss(std::span<const AdapterParams> adapters,
                                const EmbeddingGrid& emb,
                                std::span<const double> lambda,
                                std::span<AdapterParams> grads = {},
                                double weight = 1.0) {
  if (adapters.size() != emb.num_layers() || lambda.size() != emb.num_layers())
    throw DimensionMismatch(
        "fine-tune loss needs one adapter and one weight per layer (L=" +
        std::to_string(emb.num_layers()) + ", adapters=" +
        std::to_string(adapters.size()) + ", weights=" +
        std::to_string(lambda.size()) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    if (lambda[i] == 0.0) continue;
    AdapterParams* g = grads.empty() ? nullptr : &grads[i];
    total += lambda[i] * adapter_ce(adapters[i], mean_of_prefixes(emb, i),
                                    static_cast<std::size_t>(emb.label), g,
                                    weight * lambda[i]);
  }
  return total;
}

// Default fine-tune weights: 0.1 per layer, 0.8 on the last one.
inline std::vector<double> default_layer_weights(std::size_t num_layers) {
  std::vector<double> w(num_layers, 0.1);
  if (!w.empty()) w.back() = 0.8;
  return w;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCoordinate {
  std::size_t index = 0;  // flat index across all checked adapters
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCoordinate> coords;
};

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

namespace detail {

// `loss` evaluates the objective at the current parameters; `param` maps a
// flat index to the parameter storage.
template <class Loss, class Param>
GradCheckReport central_difference_check(Loss&& loss, Param&& param,
                                         std::span<const double> analytic,
                                         std::span<const std::size_t> indices,
                                         double eps) {
  GradCheckReport r;
  for (std::size_t idx : indices) {
    double& theta = param(idx);
    const double saved = theta;
    theta = saved + eps;
    const double up = loss();
    theta = saved - eps;
    const double down = loss();
    theta = saved;
    GradCoordinate c{idx, analytic[idx], (up - down) / (2.0 * eps), 0.0};
    c.rel_error = relative_error(c.analytic, c.numeric);
    r.max_rel_error = std::max(r.max_rel_error, c.rel_error);
    r.coords.push_back(c);
  }
  return r;
}

inline std::vector<std::size_t> sample_indices(std::size_t total,
                                               std::size_t count,
                                               std::uint64_t seed) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count >= total) return all;
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

enum class LossKind { adapter_only, fine_tune };

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t num_coords = 64;
  std::uint64_t seed = 0;
  std::vector<std::size_t> explicit_indices;  // overrides sampling when set
};

// Checks the adapter loss of `layer` averaged over `batch`.
inline GradCheckReport grad_check_adapter_loss(AdapterParams p,
                                               std::span<const EmbeddingGrid> batch,
                                               std::size_t layer,
                                               const GradCheckOptions& opt = {}) {
  const double inv = 1.0 / static_cast<double>(batch.size());
  auto grad = AdapterParams::zeros(p.input_dim, p.hidden_dim, p.num_classes);
  for (const auto& e : batch) adapter_loss(p, e, layer, &grad, inv);
  std::vector<double> analytic(p.parameter_count());
  for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] = grad.at(i);

  auto loss = [&] {
    double s = 0.0;
    for (const auto& e : batch) s += adapter_loss(p, e, layer);
    return s * inv;
  };
  auto indices = opt.explicit_indices.empty()
                     ? detail::sample_indices(analytic.size(), opt.num_coords, opt.seed)
                     : opt.explicit_indices;
  return detail::central_difference_check(
      loss, [&](std::size_t i) -> double& { return p.at(i); }, analytic,
      indices, opt.eps);
}

// Checks the fine-tune loss averaged over `batch`, flat index running over
// adapters[0], adapters[1], ...
inline GradCheckReport grad_check_ft_loss(std::vector<AdapterParams> adapters,
                                          std::span<const EmbeddingGrid> batch,
                                          std::span<const double> lambda,
                                          const GradCheckOptions& opt = {}) {
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<AdapterParams> grads;
  std::vector<std::size_t> starts;
  std::size_t total = 0;
  for (const auto& a : adapters) {
    grads.push_back(AdapterParams::zeros(a.input_dim, a.hidden_dim, a.num_classes));
    starts.push_back(total);
    total += a.parameter_count();
  }
  for (const auto& e : batch) aggregate_ft_loss(adapters, e, lambda, grads, inv);

  auto locate = [&](std::size_t flat) {
    std::size_t a = static_cast<std::size_t>(
        std::upper_bound(starts.begin(), starts.end(), flat) - starts.begin() - 1);
    return std::pair{a, flat - starts[a]};
  };
  std::vector<double> analytic(total);
  for (std::size_t i = 0; i < total; ++i) {
    auto [a, off] = locate(i);
    analytic[i] = grads[a].at(off);
  }
  auto loss = [&] {
    double s = 0.0;
    for (const auto& e : batch) s += aggregate_ft_loss(adapters, e, lambda);
    return s * inv;
  };
  auto indices = opt.explicit_indices.empty()
                     ? detail::sample_indices(total, opt.num_coords, opt.seed)
                     : opt.explicit_indices;
  return detail::central_difference_check(
      loss,
      [&](std::size_t i) -> double& {
        auto [a, off] = locate(i);
        return adapters[a].at(off);
      },
      analytic, indices, opt.eps);
}

}  // namespace ee2d
