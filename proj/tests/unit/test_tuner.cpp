// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include <gtest/gtest.h>

#include "ee2d/tuner.hpp"
#include "test_util.hpp"

using namespace ee2d;
using ee2d::fixtures::early_signal_probes;

namespace {

const std::vector<ProbeGrid>& early_data() {
  static const auto data = early_signal_probes(77);
  return data;
}

double early_threshold() {
  return accuracy_threshold(layer_accuracy_profile(early_data()), 0.02);
}

TuneGrid ten_by_ten() {
  TuneGrid g;
  for (int i = 0; i < 10; ++i) g.tau_ignore_values.push_back(i / 10.0);
  g.tau_acc_values = log_spaced(0.1, 20.0, 10);
  return g;
}

}  // namespace

TEST(TuneGrid, DefaultShape) {
  const auto g = default_tune_grid();
  EXPECT_EQ(g.tau_ignore_values.size(), 10u);
  EXPECT_EQ(g.tau_acc_values.size(), 25u);
  EXPECT_EQ(g.size(), 250u);
  EXPECT_EQ(g.tau_acc_values.front(), 0.1);
  EXPECT_EQ(g.tau_acc_values.back(), 50.0);
  EXPECT_DOUBLE_EQ(g.tau_ignore_values[4], 0.4);
  EXPECT_NO_THROW(g.validate());
}

TEST(TuneGrid, LogSpacingHasConstantRatio) {
  const auto v = log_spaced(0.1, 50.0, 25);
  const double r = v[1] / v[0];
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_NEAR(v[i] / v[i - 1], r, 1e-9);
}

TEST(TuneGrid, JsonParsingAndValidation) {
  const auto g = tune_grid_from_json(nlohmann::json::parse(R"({"tau_ignore":[0,0.5],"tau_acc":[1,2,3]})"));
  EXPECT_EQ(g.size(), 6u);
  EXPECT_THROW(tune_grid_from_json(nlohmann::json::parse(R"({"tau_ignore":[0.5]})")), ConfigError);
  EXPECT_THROW(tune_grid_from_json(nlohmann::json::parse(R"({"tau_ignore":[0.5,0.2],"tau_acc":[1]})")),
               ConfigError);
  EXPECT_THROW(tune_grid_from_json(nlohmann::json::parse(R"({"tau_ignore":[0,1.5],"tau_acc":[1]})")),
               ConfigError);
  EXPECT_THROW(tune_grid_from_json(nlohmann::json::parse(R"({"tau_ignore":[0],"tau_acc":[]})")),
               ConfigError);
  EXPECT_THROW(tune_grid_from_json(nlohmann::json::parse(R"({"tau_ignore":[0],"tau_acc":[-1]})")),
               ConfigError);
}

TEST(GridSearch, SingleCell) {
  const TuneGrid g{{0.3}, {2.0}};
  const auto r = grid_search(early_data(), g, 0.0);
  EXPECT_EQ(r.evaluations, 1u);
  EXPECT_EQ(r.best_cfg.tau_ignore, 0.3);
  EXPECT_EQ(r.best_cfg.tau_acc, 2.0);
  EXPECT_TRUE(r.feasible);
}

TEST(GridSearch, NoExitCellIsAlwaysFeasible) {
  const auto& data = early_data();
  std::size_t ok = 0;
  for (const auto& g : data) ok += run_full(g) == static_cast<std::size_t>(g.label);
  const double full_acc = static_cast<double>(ok) / static_cast<double>(data.size());
  const TuneGrid g{{0.0, 1.0}, {0.0, 1e6}};
  const auto r = grid_search(data, g, full_acc);
  EXPECT_DOUBLE_EQ(r.accuracy_map[1][1], full_acc);
  EXPECT_TRUE(r.feasible);
}

TEST(GridSearch, BestMatchesIndependentReevaluation) {
  const auto& data = early_data();
  const double thr = early_threshold();
  const auto grid = ten_by_ten();
  const auto r = grid_search(data, grid, thr, 2);
  ASSERT_EQ(r.evaluations, 100u);

  double best = -1.0;
  for (double ti : grid.tau_ignore_values)
    for (double ta : grid.tau_acc_values) {
      std::size_t ops = 0, full = 0, ok = 0;
      for (const auto& g : data) {
        const auto o = run_2d(g, {ti, ta});
        ops += o.operations_used;
        full += g.num_layers() * g.num_sentences();
        ok += o.predicted_label == static_cast<std::size_t>(g.label);
      }
      const double acc = static_cast<double>(ok) / static_cast<double>(data.size());
      if (acc >= thr) best = std::max(best, static_cast<double>(full) / static_cast<double>(ops));
    }
  ASSERT_GT(best, 0.0);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.best_speedup, best);
  EXPECT_GE(r.best_accuracy, thr);
}

TEST(GridSearch, OpsNonDecreasingAlongTauAcc) {
  const auto r = grid_search(early_data(), ten_by_ten(), 0.5);
  for (const auto& row : r.ops_map)
    for (std::size_t j = 1; j < row.size(); ++j) EXPECT_LE(row[j - 1], row[j]);
  for (std::size_t j = 0; j < r.ops_map[0].size(); ++j)
    for (std::size_t i = 1; i < r.ops_map.size(); ++i) EXPECT_LE(r.ops_map[i - 1][j], r.ops_map[i][j]);
}

TEST(GridSearch, DeterministicAcrossThreadCounts) {
  const auto a = grid_search(early_data(), ten_by_ten(), early_threshold(), 1);
  const auto b = grid_search(early_data(), ten_by_ten(), early_threshold(), 4);
  EXPECT_EQ(a.speedup_map, b.speedup_map);
  EXPECT_EQ(a.accuracy_map, b.accuracy_map);
  EXPECT_EQ(a.best_cfg.tau_acc, b.best_cfg.tau_acc);
  EXPECT_EQ(a.best_cfg.tau_ignore, b.best_cfg.tau_ignore);
}

TEST(GridSearch, InfeasibleReportsBestAccuracy) {
  const auto r = grid_search(early_data(), ten_by_ten(), 1.0);
  if (r.feasible) GTEST_SKIP() << "dataset happens to be perfectly separable";
  double best_acc = 0.0;
  for (const auto& row : r.accuracy_map)
    for (double a : row) best_acc = std::max(best_acc, a);
  EXPECT_EQ(r.best_accuracy, best_acc);
}

TEST(GridSearch, TieBreakPrefersLargerTauAccThenSmallerTauIgnore) {
  // Every cell exits at the first step with the same accuracy and speed-up.
  const std::vector<ProbeGrid> data = {ee2d::fixtures::constant_probe(0, 2, 1, {1.0, 0.0})};
  const TuneGrid g{{0.0, 0.2, 0.4}, {0.1, 0.5, 0.9}};
  const auto r = grid_search(data, g, 1.0);
  EXPECT_EQ(r.best_cfg.tau_acc, 0.9);
  EXPECT_EQ(r.best_cfg.tau_ignore, 0.0);
}

TEST(GridSearch, RejectsBadInputs) {
  EXPECT_THROW(grid_search({}, ten_by_ten(), 0.5), EmptyFilter);
  EXPECT_THROW(grid_search(early_data(), ten_by_ten(), 1.5), ConfigError);
}

TEST(RefineSearch, BudgetNineIsOneCoarseStage) {
  const auto r = refine_search(early_data(), TuneBounds{}, early_threshold(), 9);
  EXPECT_EQ(r.evaluations, 9u);
  EXPECT_EQ(r.stage_best.size(), 1u);
}

TEST(RefineSearch, RespectsBudgetAndKeepsBestSoFar) {
  for (std::size_t budget : {10, 17, 27, 40}) {
    const auto r = refine_search(early_data(), TuneBounds{}, early_threshold(), budget);
    EXPECT_LE(r.evaluations, budget);
    for (std::size_t k = 1; k < r.stage_best.size(); ++k)
      EXPECT_GE(r.stage_best[k], r.stage_best[k - 1]);
    for (const auto& p : r.points) {
      EXPECT_GE(p.cfg.tau_ignore, 0.0);
      EXPECT_LE(p.cfg.tau_ignore, 0.9);
      EXPECT_GE(p.cfg.tau_acc, 0.1);
      EXPECT_LE(p.cfg.tau_acc, 50.0);
      if (r.feasible && p.accuracy >= early_threshold()) {
        EXPECT_LE(p.speedup, r.best_speedup);
      }
    }
  }
}

TEST(RefineSearch, Budget27NearExhaustiveBest) {
  const double thr = early_threshold();
  const auto exhaustive = grid_search(early_data(), default_tune_grid(), thr, 2);
  const auto r = refine_search(early_data(), TuneBounds{}, thr, 27);
  ASSERT_TRUE(exhaustive.feasible);
  ASSERT_TRUE(r.feasible);
  EXPECT_GE(r.best_speedup, 0.9 * exhaustive.best_speedup)
      << "refine " << r.best_speedup << " vs grid " << exhaustive.best_speedup;
}

TEST(RefineSearch, RejectsSmallBudgetAndBadBounds) {
  EXPECT_THROW(refine_search(early_data(), TuneBounds{}, 0.5, 8), ConfigError);
  EXPECT_THROW(refine_search(early_data(), TuneBounds{0.0, 0.9, 0.0, 50.0}, 0.5, 9), ConfigError);
  EXPECT_THROW(refine_search(early_data(), TuneBounds{0.5, 0.2, 0.1, 50.0}, 0.5, 9), ConfigError);
}

TEST(TuneHeatmapCsv, LayoutMatchesGrid) {
  const TuneGrid g{{0.0, 0.5}, {1.0, 2.0, 4.0}};
  std::ostringstream out;
  write_tune_heatmap_csv(out, g, {{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(out.str(), "tau_ignore\\tau_acc,1,2,4\n0,1,2,3\n0.5,4,5,6\n");
}
