// SPDX-License-Identifier: Apache-2.0
//
// Threshold search: pick (tau_ignore, tau_acc) with the largest speed-up
// whose accuracy stays at or above a floor.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ee2d/engine.hpp"
#include "ee2d/error.hpp"
#include "ee2d/grid.hpp"
#include "ee2d/metrics.hpp"
#include "ee2d/parallel.hpp"

namespace ee2d {

struct TuneGrid {
  std::vector<double> tau_ignore_values;
  std::vector<double> tau_acc_values;

  void validate() const {
    auto increasing = [](const std::vector<double>& v) {
      return !v.empty() && std::adjacent_find(v.begin(), v.end(),
                                              [](double a, double b) { return a >= b; }) ==
                               v.end();
    };
    if (!increasing(tau_ignore_values) || !increasing(tau_acc_values))
      throw ConfigError("tune grid axes must be nonempty and strictly increasing");
    if (tau_ignore_values.front() < 0.0 || tau_ignore_values.back() > 1.0)
      throw ConfigError("tau_ignore values must lie in [0, 1]");
    if (tau_acc_values.front() < 0.0) throw ConfigError("tau_acc values must be >= 0");
  }

  std::size_t size() const { return tau_ignore_values.size() * tau_acc_values.size(); }
};

inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (n == 1) return {lo};
  std::vector<double> v(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  v.front() = lo;
  v.back() = hi;
  return v;
}

// 10 x 25 cells: tau_ignore 0.0..0.9, tau_acc log-spaced over [0.1, 50].
inline TuneGrid default_tune_grid() {
  TuneGrid g;
  for (int i = 0; i < 10; ++i) g.tau_ignore_values.push_back(i / 10.0);
  g.tau_acc_values = log_spaced(0.1, 50.0, 25);
  return g;
}

inline TuneGrid tune_grid_from_json(const nlohmann::json& j) {
  TuneGrid g;
  try {
    g.tau_ignore_values = j.at("tau_ignore").get<std::vector<double>>();
    g.tau_acc_values = j.at("tau_acc").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed tune grid: ") + e.what());
  }
  g.validate();
  return g;
}

struct TunePoint {
  EEConfig cfg;
  double accuracy = 0.0;
  double speedup = 0.0;  // speedup_total
  std::size_t total_ops = 0;
};

struct TuneResult {
  EEConfig best_cfg;
  double best_speedup = 0.0;
  double best_accuracy = 0.0;
  std::size_t evaluations = 0;
  bool feasible = false;
  // Grid search only: [tau_ignore index][tau_acc index].
  Heatmap accuracy_map, speedup_map, ops_map;
  // Every evaluated point, in evaluation order.
  std::vector<TunePoint> points;
  // Refinement only: best feasible speed-up after each stage (0 if none yet).
  std::vector<double> stage_best;
};

inline TunePoint evaluate_point(std::span<const ProbeGrid> data, const EEConfig& cfg) {
  const auto r = evaluate_2d(data, cfg, 1);
  return {cfg, r.accuracy, r.speedup_total, r.total_ops};
}

namespace detail {

// True if `a` should replace the current best `b`.
inline bool better(const TunePoint& a, const TunePoint& b, double acc_thr) {
  const bool fa = a.accuracy >= acc_thr, fb = b.accuracy >= acc_thr;
  if (fa != fb) return fa;
  if (!fa) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  } else if (a.speedup != b.speedup) {
    return a.speedup > b.speedup;
  }
  if (a.cfg.tau_acc != b.cfg.tau_acc) return a.cfg.tau_acc > b.cfg.tau_acc;
  return a.cfg.tau_ignore < b.cfg.tau_ignore;
}

inline TunePoint best_of(std::span<const TunePoint> pts, double acc_thr) {
  TunePoint best = pts.front();
  for (const auto& p : pts.subspan(1))
    if (better(p, best, acc_thr)) best = p;
  return best;
}

inline void fill_best(TuneResult& r, double acc_thr) {
  const auto b = best_of(r.points, acc_thr);
  r.best_cfg = b.cfg;
  r.best_speedup = b.speedup;
  r.best_accuracy = b.accuracy;
  r.feasible = b.accuracy >= acc_thr;
  r.evaluations = r.points.size();
}

inline void check_inputs(std::span<const ProbeGrid> data, double acc_thr) {
  if (data.empty()) throw EmptyFilter("cannot tune on an empty dataset");
  if (!(acc_thr >= 0.0 && acc_thr <= 1.0))
    throw ConfigError("accuracy threshold must lie in [0, 1]");
}

}  // namespace detail

inline TuneResult grid_search(std::span<const ProbeGrid> data, const TuneGrid& grid,
                              double acc_thr, std::size_t threads = 1) {
  detail::check_inputs(data, acc_thr);
  grid.validate();
  const std::size_t rows = grid.tau_ignore_values.size(), cols = grid.tau_acc_values.size();
  TuneResult r;
  r.points.resize(rows * cols);
  parallel_for(rows * cols, threads, [&](std::size_t idx) {
    const EEConfig cfg{grid.tau_ignore_values[idx / cols], grid.tau_acc_values[idx % cols]};
    r.points[idx] = evaluate_point(data, cfg);
  });
  r.accuracy_map.assign(rows, std::vector<double>(cols));
  r.speedup_map = r.ops_map = r.accuracy_map;
  for (std::size_t idx = 0; idx < rows * cols; ++idx) {
    const auto& p = r.points[idx];
    r.accuracy_map[idx / cols][idx % cols] = p.accuracy;
    r.speedup_map[idx / cols][idx % cols] = p.speedup;
    r.ops_map[idx / cols][idx % cols] = static_cast<double>(p.total_ops);
  }
  detail::fill_best(r, acc_thr);
  return r;
}

// tau_acc is searched in log space, so its lower bound must be positive.
struct TuneBounds {
  double tau_ignore_lo = 0.0, tau_ignore_hi = 0.9;
  double tau_acc_lo = 0.1, tau_acc_hi = 50.0;

  void validate() const {
    if (!(0.0 <= tau_ignore_lo && tau_ignore_lo <= tau_ignore_hi && tau_ignore_hi <= 1.0))
      throw ConfigError("tau_ignore bounds must satisfy 0 <= lo <= hi <= 1");
    if (!(0.0 < tau_acc_lo && tau_acc_lo <= tau_acc_hi && std::isfinite(tau_acc_hi)))
      throw ConfigError("tau_acc bounds must satisfy 0 < lo <= hi");
  }
};

// Coarse 3x3 over the bounds, then repeated 3x3 stages centred on the best
// point so far with half the previous spacing. Points already evaluated are
// reused and not charged to the budget. A stage that would overrun the budget
// is evaluated only up to the budget.
inline TuneResult refine_search(std::span<const ProbeGrid> data, const TuneBounds& bounds,
                                double acc_thr, std::size_t budget, std::size_t threads = 1) {
  detail::check_inputs(data, acc_thr);
  bounds.validate();
  if (budget < 9) throw ConfigError("refinement budget must be >= 9");

  const double u_lo = std::log(bounds.tau_acc_lo), u_hi = std::log(bounds.tau_acc_hi);
  double ci = (bounds.tau_ignore_lo + bounds.tau_ignore_hi) / 2.0;
  double cu = (u_lo + u_hi) / 2.0;
  double hi_step = (bounds.tau_ignore_hi - bounds.tau_ignore_lo) / 2.0;
  double u_step = (u_hi - u_lo) / 2.0;

  // Bounds map back exactly rather than through exp(log(x)).
  auto to_tau_acc = [&](double u) {
    if (u <= u_lo) return bounds.tau_acc_lo;
    if (u >= u_hi) return bounds.tau_acc_hi;
    return std::exp(u);
  };

  TuneResult r;
  std::map<std::pair<double, double>, std::size_t> seen;  // (tau_ignore, log tau_acc)
  while (r.points.size() < budget) {
    std::vector<std::pair<double, double>> fresh;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b) {
        const double ti = std::clamp(ci + a * hi_step, bounds.tau_ignore_lo, bounds.tau_ignore_hi);
        const double u = std::clamp(cu + b * u_step, u_lo, u_hi);
        if (!seen.contains({ti, u}) &&
            std::find(fresh.begin(), fresh.end(), std::pair{ti, u}) == fresh.end())
          fresh.emplace_back(ti, u);
      }
    if (fresh.empty()) break;  // converged onto already-evaluated points
    fresh.resize(std::min(fresh.size(), budget - r.points.size()));

    std::vector<TunePoint> stage(fresh.size());
    parallel_for(fresh.size(), threads, [&](std::size_t i) {
      stage[i] = evaluate_point(data, {fresh[i].first, to_tau_acc(fresh[i].second)});
    });
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      seen[fresh[i]] = r.points.size();
      r.points.push_back(stage[i]);
    }
    detail::fill_best(r, acc_thr);
    r.stage_best.push_back(r.feasible ? r.best_speedup : 0.0);

    ci = r.best_cfg.tau_ignore;
    cu = std::log(r.best_cfg.tau_acc);
    hi_step /= 2.0;
    u_step /= 2.0;
  }
  return r;
}

inline void write_tune_heatmap_csv(std::ostream& out, const TuneGrid& grid, const Heatmap& h) {
  out << "tau_ignore\\tau_acc";
  for (double v : grid.tau_acc_values) out << ',' << v;
  out << '\n';
  for (std::size_t i = 0; i < h.size(); ++i) {
    out << grid.tau_ignore_values[i];
    for (double v : h[i]) out << ',' << v;
    out << '\n';
  }
}

}  // namespace ee2d
