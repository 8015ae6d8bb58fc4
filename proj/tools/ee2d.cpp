// SPDX-License-Identifier: Apache-2.0
//
// ee2d: command-line front end for the 2D early-exit library.
//
// Exit codes: 0 success, 1 domain error (printed as "<ErrorName>: message"),
// 2 usage error.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ee2d/ee2d.hpp"

namespace {

using nlohmann::json;
using namespace ee2d;

struct Globals {
  bool json_out = false;
  std::uint64_t seed = 0;
  std::size_t threads = default_thread_count();
  int verbosity = 0;
};

Globals g;
const CLI::Option* seed_option = nullptr;  // to tell an explicit --seed from the default

void log(const std::string& msg) {
  if (g.verbosity > 0) std::cerr << "[ee2d] " << msg << '\n';
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

std::vector<double> parse_csv_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size() && item.find_first_not_of(" ", used) != std::string::npos)
        throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse '" + item + "' as a number in list '" + csv + "'");
    }
  }
  return out;
}

ProbeDataset load_probes(const std::string& path) {
  auto ds = load_probe_dataset(path);
  log("loaded " + std::to_string(ds.grids.size()) + " probe grids from " + path);
  return ds;
}

json eval_json(const EvalReport& r, bool per_sample) {
  json j = {{"accuracy", r.accuracy},
            {"total_ops", r.total_ops},
            {"total_full_ops", r.total_full_ops},
            {"speedup_total", r.speedup_total},
            {"speedup_mean", r.speedup_mean},
            {"samples", r.per_sample.size()}};
  if (per_sample) {
    json rows = json::array();
    for (const auto& s : r.per_sample) {
      json row = {{"label", s.label},
                  {"prediction", s.prediction},
                  {"operations_used", s.operations_used},
                  {"exited_early", s.exited_early}};
      row["exit_layer"] = s.exit_step ? json(s.exit_step->layer) : json(nullptr);
      row["exit_sentence"] = s.exit_step ? json(s.exit_step->sentence) : json(nullptr);
      rows.push_back(row);
    }
    j["per_sample"] = rows;
  }
  return j;
}

void print_eval(const EvalReport& r) {
  std::cout << "samples:        " << r.per_sample.size() << '\n'
            << "accuracy:       " << r.accuracy << '\n'
            << "total ops:      " << r.total_ops << " of " << r.total_full_ops << '\n'
            << "speed-up total: " << r.speedup_total << '\n'
            << "speed-up mean:  " << r.speedup_mean << '\n';
}

// ------------------------------------------------------------------ split

void add_split(CLI::App& app) {
  auto* cmd = app.add_subcommand("split", "Split a text file into sentences");
  static std::string in, abbrev;
  cmd->add_option("--in", in, "Input text file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--abbrev", abbrev, "Abbreviation list, one per line (replaces defaults)")
      ->check(CLI::ExistingFile);
  cmd->callback([] {
    const auto abbrevs =
        abbrev.empty() ? textseg::default_abbreviations() : textseg::load_abbreviations(abbrev);
    const auto r = textseg::split_sentences(read_text(in), abbrevs);
    if (g.json_out) {
      emit({{"sentences", r.sentences}, {"source_length", r.source_length}});
    } else {
      for (const auto& s : r.sentences) std::cout << s << '\n';
    }
  });
}

// ------------------------------------------------------------------ validate

void add_validate(CLI::App& app) {
  auto* cmd = app.add_subcommand("validate", "Validate a probe or embedding dataset");
  static std::string in;
  cmd->add_option("--in", in, "Dataset JSONL")->required();
  cmd->callback([] {
    const auto any = load_dataset(in);
    const auto& m = std::visit([](const auto& ds) -> const DatasetManifest& { return ds.manifest; },
                               any);
    std::size_t min_m = SIZE_MAX, max_m = 0;
    std::visit(
        [&](const auto& ds) {
          for (const auto& grid : ds.grids) {
            min_m = std::min(min_m, grid.num_sentences());
            max_m = std::max(max_m, grid.num_sentences());
          }
        },
        any);
    if (g.json_out) {
      json j = {{"valid", true},       {"kind", to_string(m.kind)},
                {"samples", m.samples}, {"num_classes", m.num_classes},
                {"num_layers", m.num_layers}, {"min_sentences", min_m},
                {"max_sentences", max_m}};
      if (m.embed_dim) j["embed_dim"] = *m.embed_dim;
      emit(j);
    } else {
      std::cout << in << ": valid " << to_string(m.kind) << " dataset, " << m.samples
                << " samples, L=" << m.num_layers << ", C=" << m.num_classes;
      if (m.embed_dim) std::cout << ", D=" << *m.embed_dim;
      std::cout << ", m in [" << min_m << ", " << max_m << "]\n";
    }
  });
}

// ------------------------------------------------------------------ apply-adapters

void add_apply(CLI::App& app) {
  auto* cmd = app.add_subcommand("apply-adapters", "Turn embedding grids into probe grids");
  static std::string emb, adapters, out;
  cmd->add_option("--emb", emb, "Embedding dataset JSONL")->required();
  cmd->add_option("--adapters", adapters, "Adapter JSONL")->required();
  cmd->add_option("--out", out, "Output probe dataset JSONL")->required();
  cmd->callback([] {
    const auto ds = load_embedding_dataset(emb);
    const auto params = load_adapters(adapters);
    const auto probes = apply_adapters(ds, params, g.threads);
    save_dataset(probes, out);
    if (g.json_out)
      emit({{"out", out}, {"samples", probes.grids.size()}});
    else
      std::cout << "wrote " << probes.grids.size() << " probe grids to " << out << '\n';
  });
}

// ------------------------------------------------------------------ train

void add_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "Train per-layer adapters");
  static std::string emb, out, mode = "adapter-only", lambda;
  static TrainConfig cfg;
  cmd->add_option("--emb", emb, "Embedding dataset JSONL")->required();
  cmd->add_option("--out", out, "Output adapter JSONL")->required();
  cmd->add_option("--mode", mode, "Training objective")
      ->check(CLI::IsMember({"adapter-only", "joint"}))
      ->capture_default_str();
  cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--batch", cfg.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--epochs", cfg.epochs, "Epochs")->capture_default_str();
  cmd->add_option("--hidden", cfg.hidden_dim, "Adapter hidden width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lambda", lambda, "Comma-separated per-layer weights (joint mode)");
  cmd->callback([] {
    const auto ds = load_embedding_dataset(emb);
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    if (!lambda.empty()) cfg.layer_weights = parse_csv_doubles(lambda);
    const auto m = mode == "joint" ? TrainMode::joint : TrainMode::adapter_only;
    log("training " + std::to_string(ds.manifest.num_layers) + " adapters on " +
        std::to_string(ds.grids.size()) + " samples");
    const auto r = train_adapters(ds.grids, ds.manifest.num_classes, cfg, m);
    save_adapters(r.adapters, out);
    if (g.json_out) {
      emit({{"out", out}, {"loss_trace", r.loss_trace}, {"layer_loss_trace", r.layer_loss_trace}});
    } else {
      std::cout << "epoch  loss\n";
      for (std::size_t e = 0; e < r.loss_trace.size(); ++e)
        std::cout << e << "  " << r.loss_trace[e] << '\n';
      std::cout << "wrote " << r.adapters.size() << " adapters to " << out << '\n';
    }
  });
}

// ------------------------------------------------------------------ grad-check

void add_grad_check(CLI::App& app) {
  auto* cmd = app.add_subcommand("grad-check",
                                 "Compare analytic and finite-difference gradients");
  static std::string emb, adapters, lambda;
  static GradCheckOptions opt;
  static std::size_t hidden = 16, samples = 8;
  static double tol = 1e-4;
  cmd->add_option("--emb", emb, "Embedding dataset JSONL")->required();
  cmd->add_option("--adapters", adapters, "Adapter JSONL (default: random adapters)");
  cmd->add_option("--eps", opt.eps, "Finite-difference step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--coords", opt.num_coords, "Coordinates sampled per loss")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--hidden", hidden, "Hidden width of random adapters")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--samples", samples, "Samples in the checked batch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lambda", lambda, "Comma-separated fine-tune weights");
  cmd->add_option("--tol", tol, "Pass threshold on max relative error")->capture_default_str();
  cmd->callback([] {
    const auto ds = load_embedding_dataset(emb);
    const std::size_t L = ds.manifest.num_layers, D = *ds.manifest.embed_dim,
                      C = ds.manifest.num_classes;
    std::vector<AdapterParams> params;
    if (adapters.empty()) {
      std::mt19937_64 rng(g.seed);
      for (std::size_t i = 0; i < L; ++i) params.push_back(AdapterParams::random(D, hidden, C, rng));
    } else {
      params = load_adapters(adapters);
    }
    const std::span<const EmbeddingGrid> batch(
        ds.grids.data(), std::min(samples, ds.grids.size()));
    const auto weights = lambda.empty() ? default_layer_weights(L) : parse_csv_doubles(lambda);
    opt.seed = g.seed;
    const auto ra = grad_check_adapter_loss(params[L - 1], batch, L - 1, opt);
    const auto rf = grad_check_ft_loss(params, batch, weights, opt);
    const bool pass = ra.max_rel_error < tol && rf.max_rel_error < tol;
    if (g.json_out) {
      emit({{"adapter_loss", {{"coords", ra.coords.size()}, {"max_rel_error", ra.max_rel_error}}},
            {"fine_tune_loss", {{"coords", rf.coords.size()}, {"max_rel_error", rf.max_rel_error}}},
            {"tolerance", tol},
            {"pass", pass}});
    } else {
      std::cout << "adapter loss:   " << ra.coords.size() << " coords, max rel error "
                << ra.max_rel_error << '\n'
                << "fine-tune loss: " << rf.coords.size() << " coords, max rel error "
                << rf.max_rel_error << '\n'
                << (pass ? "PASS" : "FAIL") << " (tolerance " << tol << ")\n";
    }
  });
}

// ------------------------------------------------------------------ synth

void add_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic embedding dataset");
  static std::string spec_path, out;
  cmd->add_option("--spec", spec_path, "Synth spec JSON")->required();
  cmd->add_option("--out", out, "Output embedding dataset JSONL")->required();
  cmd->callback([] {
    auto spec = synth_spec_from_json(read_json(spec_path));
    if (seed_option->count() > 0) spec.seed = g.seed;
    const auto ds = generate_embedding_dataset(spec, g.threads);
    save_dataset(ds, out);
    if (g.json_out)
      emit({{"out", out}, {"samples", ds.grids.size()}, {"seed", spec.seed}});
    else
      std::cout << "wrote " << ds.grids.size() << " embedding grids to " << out << '\n';
  });
}

// ------------------------------------------------------------------ simulate / eval

void add_simulate(CLI::App& app) {
  auto* cmd = app.add_subcommand("simulate", "Run 2D early exit over a probe dataset");
  static std::string in, per_sample_out;
  static EEConfig cfg;
  cmd->add_option("--in", in, "Probe dataset JSONL")->required();
  cmd->add_option("--tau-ignore", cfg.tau_ignore, "Ignore threshold")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--tau-acc", cfg.tau_acc, "Acceptance threshold")
      ->required()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--per-sample-out", per_sample_out, "Per-sample CSV");
  cmd->callback([] {
    cfg.validate();
    const auto ds = load_probes(in);
    const auto r = evaluate_2d(ds.grids, cfg, g.threads);
    if (!per_sample_out.empty()) {
      auto out = open_out(per_sample_out);
      out << "label,prediction,operations_used,exited_early,exit_layer,exit_sentence\n";
      for (const auto& s : r.per_sample) {
        out << s.label << ',' << s.prediction << ',' << s.operations_used << ','
            << (s.exited_early ? 1 : 0) << ',';
        if (s.exit_step) out << s.exit_step->layer << ',' << s.exit_step->sentence;
        else out << ',';
        out << '\n';
      }
    }
    if (g.json_out) emit(eval_json(r, false));
    else print_eval(r);
  });
}

void add_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "Evaluation report as JSON");
  static std::string in;
  static EEConfig cfg;
  cmd->add_option("--in", in, "Probe dataset JSONL")->required();
  cmd->add_option("--tau-ignore", cfg.tau_ignore, "Ignore threshold")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--tau-acc", cfg.tau_acc, "Acceptance threshold")
      ->required()
      ->check(CLI::NonNegativeNumber);
  cmd->callback([] {
    cfg.validate();
    const auto ds = load_probes(in);
    emit(eval_json(evaluate_2d(ds.grids, cfg, g.threads), true));
  });
}

// ------------------------------------------------------------------ profile

void add_profile(CLI::App& app) {
  auto* cmd = app.add_subcommand("profile", "Layer-wise accuracy profile and exit layer");
  static std::string in;
  static double allowed = 0.02;
  cmd->add_option("--in", in, "Probe dataset JSONL")->required();
  cmd->add_option("--T", allowed, "Allowed accuracy loss")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->callback([] {
    const auto ds = load_probes(in);
    const auto profile = layer_accuracy_profile(ds.grids);
    const double thr = accuracy_threshold(profile, allowed);
    const auto le = optimal_exit_layer(profile, thr);
    const double sp = speedup_layerwise(ds.manifest.num_layers, le);
    if (g.json_out) {
      emit({{"accuracy", profile.acc}, {"acc_thr", thr}, {"exit_layer", le}, {"speedup_layerwise", sp}});
    } else {
      std::cout << "layer  accuracy\n";
      for (std::size_t l = 0; l < profile.acc.size(); ++l)
        std::cout << l << "  " << profile.acc[l] << '\n';
      std::cout << "acc_thr:    " << thr << '\n'
                << "exit layer: " << le << '\n'
                << "speed-up:   " << sp << '\n';
    }
  });
}

// ------------------------------------------------------------------ heatmap

void add_heatmap(CLI::App& app) {
  auto* cmd = app.add_subcommand("heatmap", "Layer x sentence and block accuracy tables");
  static std::string in, out, blocks_out;
  static std::size_t m = 0;
  cmd->add_option("--in", in, "Probe dataset JSONL")->required();
  cmd->add_option("--m", m, "Use samples with exactly this many sentences")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", out, "Cell accuracy CSV")->required();
  cmd->add_option("--blocks-out", blocks_out, "Block accuracy CSV");
  cmd->callback([] {
    const auto ds = load_probes(in);
    const auto h = cell_accuracy_heatmap(ds.grids, m);
    {
      auto f = open_out(out);
      write_heatmap_csv(f, h);
    }
    std::vector<double> blocks;
    if (!blocks_out.empty()) {
      blocks = block_accuracy_curve(ds.grids, m);
      auto f = open_out(blocks_out);
      write_block_csv(f, blocks);
    }
    if (g.json_out) {
      json j = {{"cells", h}};
      if (!blocks.empty()) j["blocks"] = blocks;
      emit(j);
    } else {
      std::cout << "wrote " << h.size() << "x" << m << " heatmap to " << out << '\n';
      if (!blocks_out.empty()) std::cout << "wrote block accuracies to " << blocks_out << '\n';
    }
  });
}

// ------------------------------------------------------------------ cost-model

void add_cost_model(CLI::App& app) {
  auto* cmd = app.add_subcommand("cost-model", "Per-layer FLOP estimate for one sentence");
  static CostModelInput inp;
  cmd->add_option("--tps", inp.tokens_per_sentence, "Tokens per sentence")->capture_default_str();
  cmd->add_option("--dim", inp.embed_dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--expf", inp.mlp_expansion, "MLP expansion factor")->capture_default_str();
  cmd->add_option("--s", inp.sentence_index, "Sentence index")->capture_default_str();
  cmd->callback([] {
    const auto r = cost_model(inp);
    if (g.json_out) {
      emit({{"qkv_flops", r.qkv_flops},
            {"attention_flops", r.attention_flops},
            {"attention_coefficient", r.attention_coefficient},
            {"mlp_flops", r.mlp_flops},
            {"crossover_s", r.crossover_s}});
    } else {
      std::cout << "qkv:        " << r.qkv_flops << '\n'
                << "attention:  " << r.attention_flops << " (" << r.attention_coefficient
                << " per sentence index)\n"
                << "mlp:        " << r.mlp_flops << '\n'
                << "crossover:  s = " << r.crossover_s << '\n';
    }
  });
}

// ------------------------------------------------------------------ tune

void add_tune(CLI::App& app) {
  auto* cmd = app.add_subcommand("tune", "Search thresholds for the best feasible speed-up");
  static std::string in, grid_path, heatmap_out;
  static double allowed = 0.02;
  static bool refine = false;
  static std::size_t budget = 30;
  cmd->add_option("--in", in, "Probe dataset JSONL")->required();
  cmd->add_option("--T", allowed, "Allowed accuracy loss")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  auto* grid_opt = cmd->add_option("--grid", grid_path, "Grid JSON {\"tau_ignore\":[..],\"tau_acc\":[..]}");
  auto* refine_opt = cmd->add_flag("--refine", refine, "Coarse-to-fine search instead of a grid");
  cmd->add_option("--budget", budget, "Evaluation budget for --refine")
      ->check(CLI::Range(std::size_t{9}, std::size_t{1000000}))
      ->capture_default_str();
  cmd->add_option("--heatmap-out", heatmap_out, "CSV prefix for heatmaps");
  grid_opt->excludes(refine_opt);
  cmd->callback([] {
    const auto ds = load_probes(in);
    const auto profile = layer_accuracy_profile(ds.grids);
    const double thr = accuracy_threshold(profile, allowed);
    const double baseline =
        speedup_layerwise(ds.manifest.num_layers, optimal_exit_layer(profile, thr));
    TuneResult r;
    TuneGrid grid;
    if (refine) {
      r = refine_search(ds.grids, TuneBounds{}, thr, budget, g.threads);
    } else {
      grid = grid_path.empty() ? default_tune_grid() : tune_grid_from_json(read_json(grid_path));
      r = grid_search(ds.grids, grid, thr, g.threads);
    }
    if (!heatmap_out.empty()) {
      if (refine) {
        auto f = open_out(heatmap_out + "_points.csv");
        f << "tau_ignore,tau_acc,accuracy,speedup_total,total_ops\n";
        for (const auto& p : r.points)
          f << p.cfg.tau_ignore << ',' << p.cfg.tau_acc << ',' << p.accuracy << ','
            << p.speedup << ',' << p.total_ops << '\n';
      } else {
        auto fa = open_out(heatmap_out + "_accuracy.csv");
        write_tune_heatmap_csv(fa, grid, r.accuracy_map);
        auto fs = open_out(heatmap_out + "_speedup.csv");
        write_tune_heatmap_csv(fs, grid, r.speedup_map);
      }
    }
    if (g.json_out) {
      emit({{"acc_thr", thr},
            {"feasible", r.feasible},
            {"best_tau_ignore", r.best_cfg.tau_ignore},
            {"best_tau_acc", r.best_cfg.tau_acc},
            {"best_speedup", r.best_speedup},
            {"best_accuracy", r.best_accuracy},
            {"evaluations", r.evaluations},
            {"speedup_layerwise", baseline},
            {"stage_best", r.stage_best}});
    } else {
      std::cout << "acc_thr:           " << thr << '\n'
                << "evaluations:       " << r.evaluations << '\n'
                << "best tau_ignore:   " << r.best_cfg.tau_ignore << '\n'
                << "best tau_acc:      " << r.best_cfg.tau_acc << '\n'
                << "best accuracy:     " << r.best_accuracy << '\n'
                << "best speed-up:     " << r.best_speedup
                << (r.feasible ? "" : "  (no config reached acc_thr)") << '\n'
                << "layer-wise speed-up at acc_thr: " << baseline << '\n';
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ee2d: two-dimensional early-exit inference toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file supplying option values");
  app.add_flag("--json", g.json_out, "Emit machine-readable JSON");
  seed_option = app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")
      ->envname("EE2D_THREADS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("-v,--verbose", g.verbosity, "Log progress to stderr (repeatable)");

  add_split(app);
  add_validate(app);
  add_apply(app);
  add_train(app);
  add_grad_check(app);
  add_synth(app);
  add_simulate(app);
  add_eval(app);
  add_profile(app);
  add_heatmap(app);
  add_cost_model(app);
  add_tune(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ee2d::Error& e) {
    std::cerr << e.name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "Error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
