// Copyright 2026 The cmfda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Subcommands behind the `cmfda` executable. run_cli is callable in-process.

#ifndef CMFDA_CLI_COMMANDS_HPP_
#define CMFDA_CLI_COMMANDS_HPP_

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmfda/cli/config.hpp"
#include "cmfda/data/batching.hpp"
#include "cmfda/data/manifest.hpp"
#include "cmfda/eval/metrics.hpp"
#include "cmfda/models/checkpoint.hpp"
#include "cmfda/models/network.hpp"
#include "cmfda/nn/gradcheck_suite.hpp"
#include "cmfda/synth/generate.hpp"
#include "cmfda/train/train.hpp"

namespace cmfda::cli {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
};

namespace detail {

inline RunConfig read_config(const GlobalOptions& g) {
  return g.config.empty() ? RunConfig{} : load_run_config(g.config);
}

inline fs::path require_out(const GlobalOptions& g, const char* command) {
  if (g.out.empty()) throw UsageError(std::string(command) + ": --out DIR is required");
  return g.out;
}

inline void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("config key '") + key + "' is required");
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

/// Records of the requested split. Untagged manifests count as a single split.
inline data::Manifest select_split(const data::Manifest& m, std::optional<data::Split> split) {
  const bool tagged = std::any_of(m.records.begin(), m.records.end(), [](const auto& r) { return r.split; });
  if (!split || !tagged) return m;
  return m.filtered(split);
}

inline data::Dataset<float> load_records(const data::Manifest& m, const models::NetworkSpec& spec, bool labels) {
  if (m.empty()) throw DataError("manifest selection is empty");
  return data::load_image_dataset<float>(m, {spec.input_side, spec.color_space, labels});
}

inline int cmd_generate(const GlobalOptions& g, std::ostream& out) {
  GenerateSection s = read_config(g).generate.value_or(GenerateSection{});
  if (g.seed) s.seed = *g.seed;
  const fs::path dir = require_out(g, "generate");
  synth::GenerateConfig cfg;
  cfg.corpus_dir = s.corpus;
  cfg.annotations = s.annotations.empty() ? fs::path(s.corpus) / "annotations.json" : fs::path(s.annotations);
  cfg.count = s.count;
  cfg.mix_copy_move = s.mix_copy_move;
  cfg.mix_inpaint = s.mix_inpaint;
  cfg.category = s.category;
  cfg.output_side = s.side;
  cfg.seed = s.seed;
  cfg.out_dir = dir;
  cfg.threads = g.threads;
  cfg.domain = data::parse_domain(s.domain);
  cfg.inpaint_iterations = s.inpaint_iterations;
  cfg.copy_move.max_self_overlap = s.max_self_overlap;
  const auto result = synth::generate_dataset(cfg);
  write_run_files(dir, "generate", s.seed, to_yaml(s));
  std::string skips;
  for (const auto& sk : result.skips) skips += sk + '\n';
  write_text(dir / "skips.txt", skips);
  out << "generate: " << result.pairs_written << " of " << result.pairs_requested << " pairs written to " << dir.string()
      << " (" << result.skips.size() << " skipped attempts)\n";
  return 0;
}

inline int cmd_split(const GlobalOptions& g, std::ostream& out) {
  SplitSection s = read_config(g).split.value_or(SplitSection{});
  if (g.seed) s.seed = *g.seed;
  require_path(s.manifest, "split.manifest");
  const fs::path dir = require_out(g, "split");
  const data::Manifest in = data::read_manifest(s.manifest);
  data::Manifest tagged = data::split_dataset(in, s.train_fraction, s.seed);
  fs::create_directories(dir);
  // Re-anchor relative image paths on the output directory.
  const fs::path anchor = fs::weakly_canonical(dir);
  for (auto& r : tagged.records) {
    if (fs::path(r.path).is_absolute()) continue;
    r.path = fs::weakly_canonical(in.resolve(r)).lexically_relative(anchor).generic_string();
  }
  tagged.base_dir = dir;
  data::write_manifest(dir / "manifest.jsonl", tagged);
  write_run_files(dir, "split", s.seed, to_yaml(s));
  std::size_t n_train = tagged.filtered(data::Split::kTrain).size();
  out << "split: " << n_train << " train / " << tagged.size() - n_train << " test -> "
      << (dir / "manifest.jsonl").string() << '\n';
  return 0;
}

inline int cmd_train(const GlobalOptions& g, std::ostream& out) {
  TrainSection s = read_config(g).train.value_or(TrainSection{});
  if (g.seed) s.seed = *g.seed;
  require_path(s.source_manifest, "train.source_manifest");
  const auto tcfg_base = train_config(s);
  if (tcfg_base.method != train::Method::kSourceOnly) require_path(s.target_manifest, "train.target_manifest");
  const fs::path dir = require_out(g, "train");
  const models::NetworkSpec spec = network_spec(s);

  const auto source = load_records(select_split(data::read_manifest(s.source_manifest), data::Split::kTrain), spec, true);
  if (!source.labeled()) throw DataError("train: every source record needs a class label");
  data::Dataset<float> target;
  if (!s.target_manifest.empty() && tcfg_base.method != train::Method::kSourceOnly) {
    // Target labels are dropped at load time.
    target = load_records(select_split(data::read_manifest(s.target_manifest), data::Split::kTrain), spec, false);
  }
  std::optional<data::Dataset<float>> eval_set;
  if (!s.eval_manifest.empty()) {
    eval_set = load_records(select_split(data::read_manifest(s.eval_manifest), data::Split::kTest), spec, true);
  }

  write_run_files(dir, "train", s.seed, to_yaml(s));
  fs::create_directories(dir / "checkpoints");
  auto cfg = tcfg_base;
  cfg.checkpoint_dir = dir / "checkpoints";
  auto net = models::build_network<float>(spec, s.seed);
  train::EpochHook<float> hook = [&out](const train::EpochRecord& e, models::TwoHeadNetwork<float>&) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %3zu  L_s %.4f  domain %.4f  src_acc %.4f", e.epoch, e.class_loss,
                  e.domain_term, e.source_accuracy);
    out << line;
    if (e.target_accuracy) {
      std::snprintf(line, sizeof(line), "  tgt_acc %.4f", *e.target_accuracy);
      out << line;
    }
    out << '\n';
  };
  const auto history = train::train(net, source, target, cfg, eval_set ? &*eval_set : nullptr, hook);
  models::save_checkpoint(dir / "model.ckpt", net);
  write_text(dir / "history.csv", history.to_csv());
  out << "train: " << train::method_name(cfg.method) << ", " << history.epochs.size() << " epochs -> "
      << (dir / "model.ckpt").string() << '\n';
  return 0;
}

inline int cmd_eval(const GlobalOptions& g, std::ostream& out) {
  EvalSection s = read_config(g).eval.value_or(EvalSection{});
  require_path(s.checkpoint, "eval.checkpoint");
  require_path(s.manifest, "eval.manifest");
  const fs::path dir = require_out(g, "eval");
  auto net = models::load_checkpoint<float>(s.checkpoint);
  std::optional<data::Split> split;
  if (s.split != "all") split = data::parse_split(s.split);
  const data::Manifest m = select_split(data::read_manifest(s.manifest), split);
  const auto ds = load_records(m, net.spec(), true);
  if (!ds.labeled()) throw DataError("eval: every evaluated record needs a class label");
  const auto pred = models::predict(net, ds.inputs);
  const auto report = eval::metrics(eval::confusion(pred, ds.labels));
  const std::string label = s.label.empty() ? s.checkpoint : s.label;

  write_run_files(dir, "eval", 0, to_yaml(s));
  nlohmann::json j = eval::to_json(report);
  j["label"] = label;
  j["records"] = ds.size();
  write_text(dir / "metrics.json", j.dump(2) + '\n');
  std::string preds = "id,label,prediction\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    preds += ds.ids[i] + ',' + std::to_string(ds.labels[i]) + ',' + std::to_string(pred[i]) + '\n';
  }
  write_text(dir / "predictions.csv", preds);
  const std::vector<eval::ReportEntry> rows{{label, report}};
  write_text(dir / "report.csv", eval::render_csv(rows));
  write_text(dir / "report.txt", eval::render_text(rows));
  out << eval::render_text(rows);
  return 0;
}

inline int cmd_report(const GlobalOptions& g, std::ostream& out) {
  ReportSection s = read_config(g).report.value_or(ReportSection{});
  if (s.inputs.empty()) throw ConfigError("config key 'report.inputs' needs at least one metrics file");
  std::vector<eval::ReportEntry> rows;
  for (const auto& p : s.inputs) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open metrics file " + p);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(p + ": " + e.what());
    }
    rows.emplace_back(j.value("label", p), eval::metrics_from_json(j));
  }
  const std::string text = eval::render_text(rows);
  out << text;
  if (!g.out.empty()) {
    write_run_files(g.out, "report", 0, to_yaml(s));
    write_text(fs::path(g.out) / "report.txt", text);
    write_text(fs::path(g.out) / "report.csv", eval::render_csv(rows));
  }
  return 0;
}

inline int cmd_gradcheck(const GlobalOptions& g, std::ostream& out) {
  const auto rows = nn::run_gradcheck_suite(10, g.seed.value_or(2024));
  std::ostringstream table;
  nn::print_gradcheck_table(table, rows);
  out << table.str();
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_text(fs::path(g.out) / "gradcheck.txt", table.str());
  }
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass(); });
  return ok ? 0 : exit_code(ErrorKind::kNumeric);
}

}  // namespace detail

/// Parses argv and dispatches. Returns the process exit code:
/// 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Domain-adapted copy-move forgery detection toolkit", "cmfda"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", g.config, "YAML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the section's seed");
    auto* o = sub->add_option("--out", g.out, "output directory");
    if (needs_out) o->required();
    sub->add_option("--threads", g.threads, "worker threads (generate)")->check(CLI::Range(1, 256));
  };
  struct Entry {
    const char* name;
    const char* help;
    bool needs_out;
    int (*fn)(const GlobalOptions&, std::ostream&);
  };
  const Entry entries[] = {
      {"generate", "synthesize authentic/forged pairs from an annotated corpus", true, detail::cmd_generate},
      {"split", "tag a manifest with a stratified train/test split", true, detail::cmd_split},
      {"train", "train a source-only, DANN or DDC detector", true, detail::cmd_train},
      {"eval", "score a checkpoint on a labeled manifest", true, detail::cmd_eval},
      {"gradcheck", "finite-difference check of every layer type", false, detail::cmd_gradcheck},
      {"report", "combine metrics files into one table", false, detail::cmd_report},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, e.needs_out);
    subs.emplace_back(sub, &e);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "cmfda: " << e.what() << '\n';
    return exit_code(ErrorKind::kUsage);
  }
  for (auto& [sub, entry] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) g.seed = seed;
    try {
      return entry->fn(g, out);
    } catch (const Error& e) {
      err << "cmfda " << entry->name << ": " << e.what() << '\n';
      return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
      err << "cmfda " << entry->name << ": " << e.what() << '\n';
      return exit_code(ErrorKind::kData);
    } catch (const std::exception& e) {
      err << "cmfda " << entry->name << ": " << e.what() << '\n';
      return exit_code(ErrorKind::kUsage);
    }
  }
  return exit_code(ErrorKind::kUsage);
}

}  // namespace cmfda::cli

#endif  // CMFDA_CLI_COMMANDS_HPP_
