// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "ee2d/grid.hpp"

using namespace ee2d;

TEST(CellMatrix, CellsAreIndependentSlices) {
  CellMatrix m(2, 3, 4);
  m.cell(1, 2)[3] = 7.0;
  m.cell(0, 1)[0] = 5.0;
  EXPECT_EQ(m.cell(1, 2)[3], 7.0);
  EXPECT_EQ(m.cell(0, 1)[0], 5.0);
  double sum = 0.0;
  for (double v : m.values()) sum += v;
  EXPECT_EQ(sum, 12.0);
  EXPECT_EQ(m.values().size(), 24u);
}

TEST(ValidateDistribution, AcceptsWithinTolerance) {
  const double p[] = {0.5, 0.5 + 0.9e-5};
  EXPECT_NO_THROW(validate_distribution(p));
}

TEST(ValidateDistribution, RejectsSumOutsideTolerance) {
  const double p[] = {0.5, 0.5 + 2e-5};
  EXPECT_THROW(validate_distribution(p), NormalizationError);
  const double q[] = {0.6, 0.2};
  EXPECT_THROW(validate_distribution(q), NormalizationError);
}

TEST(ValidateDistribution, RejectsNegativeNonFiniteAndSingleClass) {
  const double neg[] = {1.2, -0.2};
  EXPECT_THROW(validate_distribution(neg), NormalizationError);
  const double nan[] = {std::numeric_limits<double>::quiet_NaN(), 1.0};
  EXPECT_THROW(validate_distribution(nan), SchemaError);
  const double one[] = {1.0};
  EXPECT_THROW(validate_distribution(one), SchemaError);
}

TEST(ValidateProbeGrid, ErrorNamesSampleLayerSentence) {
  ProbeGrid g{0, CellMatrix(2, 2, 2)};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) g.cells.cell(i, k)[0] = 1.0;
  g.cells.cell(1, 0)[0] = 0.8;
  try {
    validate_probe_grid(g, 7);
    FAIL() << "expected NormalizationError";
  } catch (const NormalizationError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 7, layer 1, sentence 0"), std::string::npos);
    EXPECT_EQ(e.name(), "NormalizationError");
  }
}

TEST(ValidateProbeGrid, LabelMustBeAClass) {
  ProbeGrid g{2, CellMatrix(1, 1, 2)};
  g.cells.cell(0, 0)[1] = 1.0;
  EXPECT_THROW(validate_probe_grid(g), SchemaError);
  g.label = 1;
  EXPECT_NO_THROW(validate_probe_grid(g));
}

TEST(ValidateEmbeddingGrid, RejectsInfinity) {
  EmbeddingGrid g{0, CellMatrix(1, 2, 3)};
  EXPECT_NO_THROW(validate_embedding_grid(g, 2));
  g.cells.cell(0, 1)[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(validate_embedding_grid(g, 2), SchemaError);
}

TEST(Argmax, TiesGoToLowestIndex) {
  const double a[] = {0.25, 0.5, 0.25};
  const double b[] = {0.5, 0.5};
  const double c[] = {0.2, 0.4, 0.4};
  EXPECT_EQ(argmax(a), 1u);
  EXPECT_EQ(argmax(b), 0u);
  EXPECT_EQ(argmax(c), 1u);
}
