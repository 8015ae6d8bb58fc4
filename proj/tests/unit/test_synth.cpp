// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "ee2d/synth.hpp"

using namespace ee2d;

namespace {

SynthSpec base_spec() {
  SynthSpec s;
  s.num_samples = 60;
  s.num_classes = 3;
  s.num_layers = 4;
  s.min_sentences = 2;
  s.max_sentences = 5;
  s.embed_dim = 5;
  s.noise_sigma = 0.4;
  s.seed = 5;
  return s;
}

}  // namespace

TEST(GenerateDataset, NoiselessUnitRampsGiveClassDirection) {
  auto s = base_spec();
  s.noise_sigma = 0.0;
  for (const auto& g : generate_dataset(s)) {
    std::vector<double> mu(5, 0.0);
    mu[static_cast<std::size_t>(g.label)] = 1.0;
    for (std::size_t i = 0; i < g.num_layers(); ++i)
      for (std::size_t k = 0; k < g.num_sentences(); ++k) {
        const auto cell = g.cells.cell(i, k);
        EXPECT_EQ(std::vector<double>(cell.begin(), cell.end()), mu);
      }
  }
}

TEST(GenerateDataset, RampsScaleSignal) {
  auto s = base_spec();
  s.noise_sigma = 0.0;
  s.min_sentences = s.max_sentences = 3;
  s.layer_ramp = {0.0, 0.5, 1.0, 1.0};
  s.sentence_ramp = {1.0, 0.5, 0.0};
  for (const auto& g : generate_dataset(s)) {
    const auto y = static_cast<std::size_t>(g.label);
    EXPECT_EQ(g.cells.cell(0, 0)[y], 0.0);
    EXPECT_EQ(g.cells.cell(1, 0)[y], 0.5);
    EXPECT_EQ(g.cells.cell(1, 1)[y], 0.25);
    EXPECT_EQ(g.cells.cell(3, 2)[y], 0.0);
  }
}

TEST(GenerateDataset, CumulativeContextKeepsEarlierSignal) {
  auto s = base_spec();
  s.noise_sigma = 0.0;
  s.min_sentences = s.max_sentences = 3;
  s.sentence_ramp = {1.0, 0.5, 0.0};
  s.context = SignalContext::cumulative;
  for (const auto& g : generate_dataset(s))
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_EQ(g.cells.cell(2, k)[static_cast<std::size_t>(g.label)], 1.0);
  s.sentence_ramp = {0.0, 0.4, 0.2};
  for (const auto& g : generate_dataset(s))
    EXPECT_EQ(g.cells.cell(0, 2)[static_cast<std::size_t>(g.label)], 0.4);
}

TEST(GenerateDataset, DeterministicUnderSeed) {
  const auto s = base_spec();
  const auto a = generate_dataset(s);
  EXPECT_EQ(a, generate_dataset(s));
  EXPECT_EQ(a, generate_dataset(s, 4));
  auto t = s;
  t.seed = 6;
  const auto b = generate_dataset(t);
  bool any_diff = false;
  for (std::size_t n = 0; n < a.size() && !any_diff; ++n)
    any_diff = a[n].num_sentences() != b[n].num_sentences() ||
               a[n].cells.values()[0] != b[n].cells.values()[0];
  EXPECT_TRUE(any_diff);
}

TEST(GenerateDataset, ClassBalance) {
  for (std::size_t n : {1, 7, 60, 61, 100}) {
    auto s = base_spec();
    s.num_samples = n;
    std::vector<std::size_t> counts(3, 0);
    for (const auto& g : generate_dataset(s)) ++counts[static_cast<std::size_t>(g.label)];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1u) << n;
  }
}

TEST(GenerateDataset, SentenceCountsWithinRangeAndVaried) {
  std::vector<std::size_t> seen(6, 0);
  for (const auto& g : generate_dataset(base_spec())) {
    ASSERT_GE(g.num_sentences(), 2u);
    ASSERT_LE(g.num_sentences(), 5u);
    ++seen[g.num_sentences()];
    EXPECT_EQ(g.num_layers(), 4u);
    EXPECT_EQ(g.embed_dim(), 5u);
  }
  for (std::size_t m = 2; m <= 5; ++m) EXPECT_GT(seen[m], 0u) << m;
}

TEST(GenerateDataset, NoiseHasRequestedScale) {
  auto s = base_spec();
  s.num_samples = 400;
  s.layer_ramp = {0.0, 0.0, 0.0, 0.0};
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& g : generate_dataset(s))
    for (double v : g.cells.values()) {
      sum += v;
      sq += v * v;
      ++n;
    }
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sd, 0.4, 0.01);
}

TEST(SynthSpec, ValidationErrors) {
  auto s = base_spec();
  s.embed_dim = 2;
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.layer_ramp = {1.0, 1.0};
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.sentence_ramp = {1.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.layer_ramp = {1.0, 1.5, 1.0, 1.0};
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.noise_sigma = -1.0;
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.min_sentences = 6;
  EXPECT_THROW(generate_dataset(s), SpecError);
}

TEST(SynthSpec, FromJson) {
  const auto s = synth_spec_from_json(nlohmann::json::parse(R"({
    "num_samples": 10, "num_classes": 2, "num_layers": 3, "embed_dim": 4,
    "sentences": [2, 3], "layer_ramp": [0, 0.5, 1], "sentence_ramp": [1, 0.5, 0],
    "noise_sigma": 0.1, "seed": 9, "context": "cumulative"})"));
  EXPECT_EQ(s.num_samples, 10u);
  EXPECT_EQ(s.min_sentences, 2u);
  EXPECT_EQ(s.max_sentences, 3u);
  EXPECT_EQ(s.layer_ramp, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.context, SignalContext::cumulative);

  const auto fixed = synth_spec_from_json(nlohmann::json::parse(
      R"({"num_samples": 1, "num_classes": 2, "num_layers": 1, "embed_dim": 2, "sentences": 4})"));
  EXPECT_EQ(fixed.min_sentences, 4u);
  EXPECT_EQ(fixed.max_sentences, 4u);
  EXPECT_EQ(fixed.context, SignalContext::local);
}

TEST(SynthSpec, FromJsonErrors) {
  EXPECT_THROW(synth_spec_from_json(nlohmann::json::parse(R"({"num_samples": 1})")), SpecError);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json::parse(
                   R"({"num_samples": 1, "num_classes": 3, "num_layers": 1, "embed_dim": 2, "sentences": 1})")),
               SpecError);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json::parse(
                   R"({"num_samples": 1, "num_classes": 2, "num_layers": 1, "embed_dim": 2,
                       "sentences": [1, 2, 3]})")),
               SpecError);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json::parse(
                   R"({"num_samples": 1, "num_classes": 2, "num_layers": 1, "embed_dim": 2,
                       "sentences": 1, "context": "global"})")),
               SpecError);
}

TEST(GenerateEmbeddingDataset, ManifestDescribesData) {
  const auto ds = generate_embedding_dataset(base_spec());
  EXPECT_EQ(ds.manifest.kind, GridKind::embedding);
  EXPECT_EQ(ds.manifest.samples, 60u);
  EXPECT_EQ(ds.manifest.embed_dim, std::optional<std::size_t>(5));
  EXPECT_EQ(ds.grids.size(), 60u);
}
