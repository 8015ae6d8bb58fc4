// SPDX-License-Identifier: Apache-2.0
//
// Adam training of the per-layer adapters over fixed embedding grids.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ee2d/adapter.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"
#include "ee2d/parallel.hpp"
#include "ee2d/seed.hpp"

namespace ee2d {

enum class TrainMode { adapter_only, joint };

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  std::vector<double> layer_weights;  // empty: default_layer_weights(L)
  std::size_t hidden_dim = kDefaultHiddenDim;
  std::size_t threads = 1;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainResult {
  std::vector<AdapterParams> adapters;  // one per layer
  // Mean per-sample objective seen during each epoch. For adapter-only
  // training this is the mean over layers of the per-layer losses.
  std::vector<double> loss_trace;
  std::vector<std::vector<double>> layer_loss_trace;  // [layer][epoch]
};

namespace detail {

class Adam {
 public:
  Adam(const AdapterParams& shape, const TrainConfig& cfg)
      : cfg_(cfg),
        m_(AdapterParams::zeros(shape.input_dim, shape.hidden_dim, shape.num_classes)),
        v_(m_) {}

  void step(AdapterParams& p, const AdapterParams& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const std::size_t n = p.parameter_count();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g.at(i);
      double& mi = m_.at(i);
      double& vi = v_.at(i);
      mi = cfg_.beta1 * mi + (1.0 - cfg_.beta1) * gi;
      vi = cfg_.beta2 * vi + (1.0 - cfg_.beta2) * gi * gi;
      p.at(i) -= cfg_.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg_.adam_eps);
    }
  }

 private:
  const TrainConfig& cfg_;
  AdapterParams m_, v_;
  std::uint64_t t_ = 0;
};

inline void zero(AdapterParams& g) {
  g.for_each_array([](std::vector<double>& a) { std::fill(a.begin(), a.end(), 0.0); });
}

inline void check_finite_loss(double loss, std::size_t layer, std::size_t epoch,
                              std::size_t batch) {
  if (!std::isfinite(loss))
    throw NonFiniteLoss("non-finite loss at layer " + std::to_string(layer) +
                        ", epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(batch));
}

struct DatasetShape {
  std::size_t layers, dim;
};

inline DatasetShape check_training_set(std::span<const EmbeddingGrid> data,
                                       std::size_t num_classes) {
  if (data.empty()) throw InconsistentShape("training set is empty");
  const DatasetShape s{data[0].num_layers(), data[0].embed_dim()};
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (data[n].num_layers() != s.layers || data[n].embed_dim() != s.dim)
      throw InconsistentShape("sample " + std::to_string(n) + " has L=" +
                              std::to_string(data[n].num_layers()) + ", D=" +
                              std::to_string(data[n].embed_dim()) +
                              " but sample 0 has L=" + std::to_string(s.layers) +
                              ", D=" + std::to_string(s.dim));
    validate_embedding_grid(data[n], num_classes, n);
  }
  return s;
}

}  // namespace detail

// adapter_only minimises each layer's adapter loss independently (layers run
// in parallel, each with its own seed stream). joint minimises the weighted
// fine-tune loss over all adapters at once.
inline TrainResult train_adapters(std::span<const EmbeddingGrid> data,
                                  std::size_t num_classes, const TrainConfig& cfg,
                                  TrainMode mode) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (num_classes < 2) throw ConfigError("need at least 2 classes");
  const auto shape = detail::check_training_set(data, num_classes);
  const std::size_t L = shape.layers, N = data.size();
  const std::size_t batches = (N + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult out;
  out.adapters.resize(L);
  out.layer_loss_trace.assign(L, std::vector<double>(cfg.epochs, 0.0));

  if (mode == TrainMode::adapter_only) {
    parallel_for(L, cfg.threads, [&](std::size_t layer) {
      std::mt19937_64 rng(mix_seed(cfg.seed, layer));
      auto p = AdapterParams::random(shape.dim, cfg.hidden_dim, num_classes, rng);
      std::vector<std::vector<double>> inputs;
      inputs.reserve(N);
      for (const auto& e : data) inputs.push_back(mean_embedding(e, layer));

      detail::Adam adam(p, cfg);
      auto grad = AdapterParams::zeros(shape.dim, cfg.hidden_dim, num_classes);
      std::vector<std::size_t> order(N);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
          const std::size_t lo = b * cfg.batch_size;
          const std::size_t hi = std::min(N, lo + cfg.batch_size);
          const double inv = 1.0 / static_cast<double>(hi - lo);
          detail::zero(grad);
          double batch_loss = 0.0;
          for (std::size_t r = lo; r < hi; ++r) {
            const std::size_t n = order[r];
            batch_loss += adapter_ce(p, inputs[n],
                                     static_cast<std::size_t>(data[n].label),
                                     &grad, inv);
          }
          detail::check_finite_loss(batch_loss, layer, epoch, b);
          epoch_loss += batch_loss;
          adam.step(p, grad);
        }
        out.layer_loss_trace[layer][epoch] = epoch_loss / static_cast<double>(N);
      }
      out.adapters[layer] = std::move(p);
    });
    out.loss_trace.assign(cfg.epochs, 0.0);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      for (std::size_t i = 0; i < L; ++i) out.loss_trace[e] += out.layer_loss_trace[i][e];
      out.loss_trace[e] /= static_cast<double>(L);
    }
    return out;
  }

  const std::vector<double> lambda =
      cfg.layer_weights.empty() ? default_layer_weights(L) : cfg.layer_weights;
  if (lambda.size() != L)
    throw DimensionMismatch("layer weights have length " + std::to_string(lambda.size()) +
                            ", expected L=" + std::to_string(L));
  for (double w : lambda)
    if (!(w >= 0.0)) throw ConfigError("layer weights must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  std::vector<detail::Adam> adams;
  std::vector<AdapterParams> grads;
  adams.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    out.adapters[i] = AdapterParams::random(shape.dim, cfg.hidden_dim, num_classes, rng);
    adams.emplace_back(out.adapters[i], cfg);
    grads.push_back(AdapterParams::zeros(shape.dim, cfg.hidden_dim, num_classes));
  }
  // inputs[layer][sample]
  std::vector<std::vector<std::vector<double>>> inputs(L);
  for (std::size_t i = 0; i < L; ++i)
    for (const auto& e : data) inputs[i].push_back(mean_of_prefixes(e, i));

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  out.loss_trace.assign(cfg.epochs, 0.0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(N, lo + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (auto& g : grads) detail::zero(g);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < L; ++i) {
        double layer_loss = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
          const std::size_t n = order[r];
          layer_loss += adapter_ce(out.adapters[i], inputs[i][n],
                                   static_cast<std::size_t>(data[n].label),
                                   lambda[i] == 0.0 ? nullptr : &grads[i],
                                   lambda[i] * inv);
        }
        out.layer_loss_trace[i][epoch] += layer_loss;
        batch_loss += lambda[i] * layer_loss;
      }
      detail::check_finite_loss(batch_loss, L, epoch, b);
      out.loss_trace[epoch] += batch_loss;
      for (std::size_t i = 0; i < L; ++i) adams[i].step(out.adapters[i], grads[i]);
    }
    out.loss_trace[epoch] /= static_cast<double>(N);
    for (std::size_t i = 0; i < L; ++i)
      out.layer_loss_trace[i][epoch] /= static_cast<double>(N);
  }
  return out;
}

}  // namespace ee2d
